#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn tailcop(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tailcop")).current_dir(dir).args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn check_ok(out: &Output) {
    assert_eq!(code(out), 0, "stderr: {}", stderr(out));
}

pub fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas")
}

/// Validate `path` against the published schema `name`.
pub fn check_schema(name: &str, path: &Path) {
    let schema = json(&schema_dir().join(format!("{name}.schema.json")));
    let instance = json(path);
    if let Err(e) = jsonschema::validate(&schema, &instance) {
        panic!("{} fails {name} schema: {e}", path.display());
    }
}
