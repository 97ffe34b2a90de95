#![allow(dead_code)]

pub mod xml_cases;

use std::path::{Path, PathBuf};
use std::process::Command;

/// The core crate's fixture directory, also when this module is compiled
/// into another crate's tests.
pub fn fixtures() -> PathBuf {
    let here = Path::new(env!("CARGO_MANIFEST_DIR"));
    let own = here.join("tests/fixtures");
    if own.join("shop").is_dir() {
        own
    } else {
        here.join("../core/tests/fixtures")
    }
}

fn git(dir: &Path, args: &[&str]) {
    let out = Command::new("git")
        .args(args)
        .current_dir(dir)
        .env("GIT_AUTHOR_NAME", "Fixture")
        .env("GIT_AUTHOR_EMAIL", "fixture@example.com")
        .env("GIT_COMMITTER_NAME", "Fixture")
        .env("GIT_COMMITTER_EMAIL", "fixture@example.com")
        .env("GIT_AUTHOR_DATE", "2024-05-01T12:00:00Z")
        .env("GIT_COMMITTER_DATE", "2024-05-01T12:00:00Z")
        .env("GIT_CONFIG_GLOBAL", "/dev/null")
        .env("GIT_CONFIG_NOSYSTEM", "1")
        .output()
        .expect("git runs");
    assert!(out.status.success(), "git {args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn copy_tree(from: &Path, to: &Path) {
    for entry in walk(from) {
        let rel = entry.strip_prefix(from).unwrap();
        let dest = to.join(rel);
        std::fs::create_dir_all(dest.parent().unwrap()).unwrap();
        std::fs::copy(&entry, &dest).unwrap();
    }
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

/// `<parent>/shop`: `main` holds the original code, `feature` adds the
/// discount guard. Commit ids are fixed by pinned dates and identities.
pub fn shop_repo(parent: &Path) -> PathBuf {
    let repo = parent.join("shop");
    std::fs::create_dir_all(&repo).unwrap();
    git(&repo, &["init", "--quiet", "--initial-branch=main"]);
    copy_tree(&fixtures().join("shop/base"), &repo);
    git(&repo, &["add", "-A"]);
    git(&repo, &["commit", "--quiet", "-m", "Initial shop"]);
    git(&repo, &["checkout", "--quiet", "-b", "feature"]);
    copy_tree(&fixtures().join("shop/feature"), &repo);
    git(&repo, &["commit", "--quiet", "-am", "Cap discounts at 50%"]);
    git(&repo, &["checkout", "--quiet", "main"]);
    repo
}

/// Unified diff from `main` to `feature` in a repo built by [`shop_repo`].
pub fn shop_diff(repo: &Path) -> String {
    let out = Command::new("git")
        .args(["diff", "main", "feature"])
        .current_dir(repo)
        .env("GIT_CONFIG_GLOBAL", "/dev/null")
        .env("GIT_CONFIG_NOSYSTEM", "1")
        .output()
        .expect("git runs");
    assert!(out.status.success());
    String::from_utf8(out.stdout).unwrap()
}

pub fn shop_config() -> revkit_core::config::EngineConfig {
    revkit_core::config::EngineConfig::load(&fixtures().join("shop/revkit.toml")).unwrap()
}

/// Engine on the shop script, with the provider kept for inspecting the
/// prompts it received.
pub fn shop_engine(
    cfg: revkit_core::config::EngineConfig,
) -> (revkit_core::pipeline::Engine, std::sync::Arc<revkit_core::llm::ScriptedProvider>) {
    let provider = std::sync::Arc::new(revkit_core::llm::ScriptedProvider::from_file(&fixtures().join("shop/script.json")).unwrap());
    (revkit_core::pipeline::Engine::new(cfg, provider.clone()), provider)
}
