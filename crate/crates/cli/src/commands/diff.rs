use respicast::io::{read_round_dir, write_revisions};
use respicast::series::diff_rounds;
use serde_json::json;

use super::{create, LoadedConfig};
use crate::error::{CliError, CliResult};
use crate::DiffArgs;

pub fn run(cfg: &LoadedConfig, args: &DiffArgs) -> CliResult<()> {
    let earlier = read_round_dir(&args.earlier, 1)?;
    let later = read_round_dir(&args.later, 2)?;
    let shared = earlier.series().filter(|s| later.get(&s.key()).is_some()).count();
    if shared == 0 {
        return Err(CliError::Data(format!(
            "{} and {} share no series",
            args.earlier.display(),
            args.later.display()
        )));
    }
    let revisions = diff_rounds(&earlier, &later);
    log::info!("{} revised counts across {shared} shared series", revisions.len());
    write_revisions(&revisions, create(&args.output)?)?;

    let mut manifest = cfg.manifest("diff-rounds", 0)?;
    for s in earlier.series() {
        manifest.input(&format!("earlier:{}", s.key()), &args.earlier.join(format!("{}.csv", s.key())))?;
    }
    for s in later.series() {
        manifest.input(&format!("later:{}", s.key()), &args.later.join(format!("{}.csv", s.key())))?;
    }
    manifest.output(&args.output)?;
    manifest.details = json!({ "shared_series": shared, "revisions": revisions.len() });
    let mut name = args.output.file_stem().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    manifest.write(&args.output.with_file_name(name))
}
