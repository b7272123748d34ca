use std::process::Command;

fn hartl() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hartl"));
    c.env_remove("OPPORTUNITY_ROOT").env("RUST_LOG", "warn");
    c
}

#[test]
fn help_exits_zero() {
    let out = hartl().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("finetune"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(hartl().arg("frobnicate").status().unwrap().code(), Some(1));
}

#[test]
fn invalid_config_lists_problems_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "schema_version = 9\nname = \"x y\"\n[method]\nkind = \"baseline\"\n").unwrap();
    let out = hartl().args(["train", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("schema_version") && err.contains("name"), "{err}");
}

#[test]
fn missing_dataset_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("opportunity.toml");
    std::fs::write(
        &path,
        format!(
            "schema_version = 1\nname = \"p\"\noutput_dir = \"{}\"\nsplit = {{ kind = \"paper_default\" }}\nmethod = {{ kind = \"baseline\" }}\ntrain = {{ max_iterations = 1, seed = 1 }}\n",
            dir.path().join("runs").display()
        ),
    )
    .unwrap();
    let out = hartl().args(["train", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn compare_of_nothing_real_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = hartl().arg("compare").arg(dir.path().join("absent")).output().unwrap();
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn generate_writes_caches() {
    let dir = tempfile::tempdir().unwrap();
    let shift = dir.path().join("shift.toml");
    let mut spec = hartl_core::synthgen::ShiftSpec::seeded(3, 4, 5);
    spec.seq_length = 300;
    std::fs::write(&shift, spec.to_toml_string()).unwrap();
    let out_dir = dir.path().join("caches");
    let status = hartl().args(["generate", "--shift"]).arg(&shift).arg("--out").arg(&out_dir).status().unwrap();
    assert!(status.success());
    let caches = std::fs::read_dir(&out_dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "cache"))
        .count();
    assert_eq!(caches, 12);
}
