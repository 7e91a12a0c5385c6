//! `--help` output of every command against checked-in copies.
//! Regenerate with `PADEVAL_BLESS=1 cargo test -p padeval-cli --test help_golden`.

use std::fs;
use std::path::PathBuf;

const COMMANDS: &[&[&str]] = &[
    &[],
    &["dv-score"],
    &["dv-batch"],
    &["ocsvm-train"],
    &["ocsvm-score"],
    &["fuse"],
    &["eval-pad"],
    &["eval-vuln"],
    &["synth-gen"],
    &["synth-gen", "depth"],
    &["synth-gen", "features"],
    &["synth-gen", "scenario"],
];

fn golden_path(cmd: &[&str]) -> PathBuf {
    let name = if cmd.is_empty() {
        "padeval".to_string()
    } else {
        cmd.join("_")
    };
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{name}.txt"))
}

fn help(cmd: &[&str]) -> String {
    let argv: Vec<&str> = std::iter::once("padeval")
        .chain(cmd.iter().copied())
        .chain(["--help"])
        .collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    assert_eq!(padeval_cli::run(argv, &mut out, &mut err), 0);
    String::from_utf8(out).unwrap()
}

#[test]
fn help_matches_golden_files() {
    let bless = std::env::var_os("PADEVAL_BLESS").is_some();
    for cmd in COMMANDS {
        let text = help(cmd);
        let path = golden_path(cmd);
        if bless {
            fs::create_dir_all(path.parent().unwrap()).unwrap();
            fs::write(&path, &text).unwrap();
            continue;
        }
        let expected =
            fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(
            text,
            expected,
            "help of {cmd:?} drifted from {}",
            path.display()
        );
    }
}

#[test]
fn every_flag_with_a_default_shows_it() {
    let with_defaults: &[(&[&str], &[&str])] = &[
        (&[], &["--seed"]),
        (&["dv-score"], &["--min-valid"]),
        (&["dv-batch"], &["--min-valid"]),
        (&["ocsvm-train"], &["--nu", "--tol"]),
        (&["fuse"], &["--wa", "--wb", "--polarity"]),
        (&["eval-vuln"], &["--fmr"]),
        (
            &["synth-gen", "scenario"],
            &["--n-bonafide", "--separation", "--invalid-fraction"],
        ),
    ];
    for (cmd, flags) in with_defaults {
        let text = help(cmd);
        for flag in *flags {
            let mut lines = text
                .lines()
                .skip_while(|l| !l.trim_start().starts_with(&format!("{flag} ")));
            let mut block = lines.next().unwrap_or_default().to_string();
            block.extend(lines.take_while(|l| !l.trim_start().starts_with('-')));
            assert!(block.contains("[default:"), "{cmd:?} {flag}:\n{text}");
        }
    }
}
