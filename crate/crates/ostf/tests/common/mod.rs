#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ostf::io::write_manifest;
use ostf_core::dataset::{DatasetStats, Geometry, Label, Manifest, Record, TamperingMethod, TextInstance};
use ostf_core::BBox;

pub fn ostf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ostf"))
        .args(args)
        .env_remove("OSTF_THREADS")
        .env("OSTF_LOG_LEVEL", "warn")
        .output()
        .expect("binary runs")
}

pub fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn instance(i: usize, label: Label) -> TextInstance {
    let x = (i % 10) as f64 * 20.0;
    let y = (i / 10 % 10) as f64 * 20.0;
    TextInstance {
        geometry: Geometry::Box(BBox::new(x, y, 16.0, 12.0)),
        label,
        transcription: None,
    }
}

/// Records whose counts are exactly the given image/instance numbers.
/// Tampered instances are dealt round-robin over the tampered images (each
/// gets at least one); authentic instances over all images.
pub fn records(prefix: &str, auth_imgs: u64, tamp_imgs: u64, auth_inst: u64, tamp_inst: u64) -> Vec<Record> {
    assert!(tamp_inst >= tamp_imgs && (tamp_imgs > 0 || tamp_inst == 0));
    let n = (auth_imgs + tamp_imgs) as usize;
    let mut recs: Vec<Record> = (0..n)
        .map(|i| Record {
            image: format!("{prefix}_{i:05}.png"),
            width: 256,
            height: 256,
            instances: Vec::new(),
        })
        .collect();
    for k in 0..tamp_inst as usize {
        let r = &mut recs[auth_imgs as usize + k % tamp_imgs as usize];
        let idx = r.instances.len();
        r.instances.push(instance(idx, Label::Tampered));
    }
    for k in 0..auth_inst as usize {
        let r = &mut recs[k % n];
        let idx = r.instances.len();
        r.instances.push(instance(idx, Label::Authentic));
    }
    recs
}

/// Train and test manifests matching a stats row.
pub fn session_manifests(method: TamperingMethod, s: &DatasetStats) -> (Manifest, Manifest) {
    let name = method.name();
    let train = records(
        &format!("{name}/train"),
        s.images.authentic.train,
        s.images.tampered.train,
        s.instances.authentic.train,
        s.instances.tampered.train,
    );
    let test = records(
        &format!("{name}/test"),
        s.images.authentic.test,
        s.images.tampered.test,
        s.instances.authentic.test,
        s.instances.tampered.test,
    );
    (Manifest::new(train), Manifest::new(test))
}

/// Writes manifests and a registry for `sessions`; returns the registry path.
pub fn write_registry(dir: &Path, sessions: &[(TamperingMethod, Manifest, Manifest)]) -> PathBuf {
    let mut reg = serde_json::Map::new();
    for (m, train, test) in sessions {
        let tr = format!("manifests/{}_train.jsonl", m.name());
        let te = format!("manifests/{}_test.jsonl", m.name());
        write_manifest(&dir.join(&tr), train).unwrap();
        write_manifest(&dir.join(&te), test).unwrap();
        reg.insert(m.name().into(), serde_json::json!({ "train": tr, "test": te }));
    }
    let path = dir.join("sessions.json");
    fs::write(&path, serde_json::to_string_pretty(&reg).unwrap()).unwrap();
    path
}

/// Every file below `dir`, keyed by relative path.
pub fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}
