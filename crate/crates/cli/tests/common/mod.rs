//! Scratch workspaces driving the `plctest` binary.
#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

pub struct Ws {
    dir: tempfile::TempDir,
}

impl Ws {
    /// A scratch directory holding the exported corpus under `c/`.
    pub fn new() -> Ws {
        let ws = Ws { dir: tempfile::tempdir().unwrap() };
        let out = ws.plctest(&["corpus", "export", "c"]);
        assert!(out.status.success());
        ws
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn write(&self, rel: &str, text: &str) {
        fs::write(self.path(rel), text).unwrap();
    }

    pub fn read(&self, rel: &str) -> String {
        fs::read_to_string(self.path(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
    }

    pub fn json(&self, rel: &str) -> Value {
        serde_json::from_str(&self.read(rel)).unwrap()
    }

    pub fn plctest(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_plctest")).args(args).current_dir(self.dir.path()).env_remove("OPENAI_API_KEY").output().unwrap()
    }
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub const MOCK: [&str; 4] = ["--provider", "mock", "--fixture", "c/fixtures"];
