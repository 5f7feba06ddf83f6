#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use porous_equiv::examples::{example1, example2};
use porous_equiv::NetworkSpec;
use tempfile::TempDir;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_porous-equiv"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("POROUS_EQUIV_TOL").output().expect("binary runs")
}

pub fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

pub fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

pub fn write_spec(dir: &TempDir, name: &str, spec: &NetworkSpec) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, spec.to_json()).unwrap();
    path
}

pub struct Workspace {
    pub dir: TempDir,
    pub ex1: PathBuf,
    pub ex2: PathBuf,
}

impl Workspace {
    pub fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let ex1 = write_spec(&dir, "example1.json", &example1());
        let ex2 = write_spec(&dir, "example2.json", &example2());
        Workspace { dir, ex1, ex2 }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn floats(v: &serde_json::Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

pub fn matrix(v: &serde_json::Value) -> Vec<Vec<f64>> {
    v.as_array().unwrap().iter().map(floats).collect()
}
