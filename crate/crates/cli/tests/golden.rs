//! Golden outputs of the determinism commands. Set `PRIVALLOC_BLESS=1` to rewrite them.

use std::fs;
use std::path::PathBuf;

use privalloc_cli::checks::{command_artifact, DETERMINISM_COMMANDS};

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

#[test]
fn outputs_match_golden_files() {
    let bless = std::env::var_os("PRIVALLOC_BLESS").is_some();
    let dir = golden_dir();
    let mut mismatched = Vec::new();
    for (name, args) in DETERMINISM_COMMANDS {
        let (_, bytes) = command_artifact(args, None).unwrap();
        let path = dir.join(name);
        if bless {
            fs::create_dir_all(&dir).unwrap();
            fs::write(&path, &bytes).unwrap();
            continue;
        }
        let expected = fs::read(&path).unwrap_or_else(|e| panic!("{}: {e} (run with PRIVALLOC_BLESS=1)", path.display()));
        if expected != bytes {
            mismatched.push(name);
        }
    }
    assert!(mismatched.is_empty(), "outputs differ from golden files: {mismatched:?}");
}

#[test]
fn sweeps_do_not_depend_on_thread_count() {
    for (_, args) in DETERMINISM_COMMANDS.iter().filter(|(_, a)| a[0] == "sweep") {
        let (_, serial) = command_artifact(args, None).unwrap();
        let (_, parallel) = command_artifact(args, Some(4)).unwrap();
        assert!(serial == parallel, "{}", args.join(" "));
    }
}
