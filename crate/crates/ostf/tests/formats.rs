mod common;

use std::fs;
use std::path::Path;

use ostf::io::{
    import_icdar, manifest_to_string, parse_manifest, read_jsonl, read_manifest, read_sessions, write_jsonl,
    write_manifest, write_png, RecipeRecord,
};
use ostf_core::dataset::{Geometry, Label, Manifest, Record, TamperingMethod, TextInstance};
use ostf_core::geometry::{Quad, Rect};
use ostf_core::imaging::TextureOp;
use ostf_core::jitter::JitterRecipe;
use ostf_core::{BBox, Image};
use proptest::prelude::*;

fn arb_geometry() -> impl Strategy<Value = Geometry> {
    let coord = -1e4..1e4f64;
    prop_oneof![
        (coord.clone(), coord.clone(), 0.0..500.0f64, 0.0..500.0f64)
            .prop_map(|(x, y, w, h)| Geometry::Box(BBox::new(x, y, w, h))),
        proptest::array::uniform8(coord).prop_map(|c| Geometry::Quad(Quad::from([
            [c[0], c[1]],
            [c[2], c[3]],
            [c[4], c[5]],
            [c[6], c[7]]
        ]))),
    ]
}

fn arb_instance() -> impl Strategy<Value = TextInstance> {
    (
        arb_geometry(),
        prop_oneof![Just(Label::Authentic), Just(Label::Tampered)],
        proptest::option::of("[a-zA-Z0-9 ,\"\\\\é文]{0,12}"),
    )
        .prop_map(|(geometry, label, transcription)| TextInstance {
            geometry,
            label,
            transcription,
        })
}

fn arb_manifest() -> impl Strategy<Value = Manifest> {
    (
        proptest::collection::vec(
            ("[a-z0-9_/]{1,12}\\.(png|jpg)", 1u32..5000, 1u32..5000, proptest::collection::vec(arb_instance(), 0..6)),
            0..6,
        ),
        proptest::collection::btree_map("[a-z.]{1,8}", "[ -~]{0,10}", 0..3),
    )
        .prop_map(|(recs, metadata)| Manifest {
            metadata,
            records: recs
                .into_iter()
                .map(|(image, width, height, instances)| Record {
                    image,
                    width,
                    height,
                    instances,
                })
                .collect(),
        })
}

proptest! {
    #[test]
    fn manifest_round_trips(m in arb_manifest()) {
        let text = manifest_to_string(&m);
        let back = parse_manifest(&text, Path::new("mem")).unwrap();
        prop_assert_eq!(back, m);
    }
}


#[test]
fn manifest_header_and_legacy_labels() {
    let text = r#"{"format":"ostf-manifest","version":1,"metadata":{"split":"train"}}
{"image":"a.jpg","width":10,"height":5,"instances":[{"bbox":[1,1,3,2],"label":"real"},{"quad":[[0,0],[4,0],[4,3],[0,3]],"label":"fake","transcription":"Hi"}]}

"#;
    let m = parse_manifest(text, Path::new("x")).unwrap();
    assert_eq!(m.metadata["split"], "train");
    assert_eq!(m.records[0].instances[0].label, Label::Authentic);
    assert_eq!(m.records[0].instances[1].label, Label::Tampered);
    assert_eq!(m.records[0].instances[1].bbox(), BBox::new(0.0, 0.0, 4.0, 3.0));

    let bad = r#"{"format":"ostf-manifest","version":99}"#;
    assert!(parse_manifest(bad, Path::new("x")).is_err());
    let err = parse_manifest("{\"image\": 3}", Path::new("m.jsonl")).unwrap_err();
    assert!(err.to_string().starts_with("m.jsonl:1"), "{err}");
}

#[test]
fn recipes_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = JitterRecipe {
        instance_index: 3,
        ops: vec![
            TextureOp::GaussianBlur { sigma: 0.1 + 0.2 },
            TextureOp::MotionBlur { length: 4, angle: 137.0 + 1.0 / 3.0 },
            TextureOp::Jpeg { quality: 61 },
        ],
        feather_width: 2,
        seed: u64::MAX - 7,
        region: Rect::new(1, 2, 30, 12),
        context: Rect::new(0, 0, 34, 16),
        attempts: 2,
        mad: 7.0 / 3.0,
    };
    let rec = RecipeRecord {
        image: "dir/a.png".into(),
        recipe,
    };
    let path = dir.path().join("r.jsonl");
    write_jsonl(&path, std::slice::from_ref(&rec)).unwrap();
    let back: Vec<RecipeRecord> = read_jsonl(&path).unwrap();
    assert_eq!(back, vec![rec]);
}

fn write_image(path: &Path, w: u32, h: u32) {
    write_png(path, &Image::filled(w, h, [9, 9, 9])).unwrap();
}

#[test]
fn icdar_import() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt");
    let imgs = dir.path().join("img");
    fs::create_dir_all(&gt).unwrap();
    write_image(&imgs.join("img_1.png"), 64, 32);
    write_image(&imgs.join("img_2.png"), 20, 20);
    fs::write(
        gt.join("gt_img_1.txt"),
        "\u{feff}10,10,50,10,50,30,10,30,HELLO\n10,10,50,30,word\nbroken line\n1,2,3,4,5,6,7,8,\"a,b\"\n",
    )
    .unwrap();
    fs::write(gt.join("img_2.txt"), "1 2 11 12 \"Tiny\"\n").unwrap();
    fs::write(gt.join("gt_orphan.txt"), "1,1,2,2,x\n").unwrap();

    let (m, warnings) = import_icdar(&gt, &imgs).unwrap();
    assert_eq!(m.records.len(), 2);
    let r1 = &m.records[0];
    assert_eq!((r1.image.as_str(), r1.width, r1.height), ("img_1.png", 64, 32));
    assert_eq!(r1.instances.len(), 3);
    assert_eq!(r1.instances[0].transcription.as_deref(), Some("HELLO"));
    assert_eq!(r1.instances[1].geometry, Geometry::Box(BBox::new(10.0, 10.0, 40.0, 20.0)));
    assert_eq!(r1.instances[2].transcription.as_deref(), Some("a,b"));
    assert!(r1.instances.iter().all(|i| i.label == Label::Authentic));
    assert_eq!(warnings.len(), 1);
    assert_eq!(warnings[0].warning.line, 3);
    assert_eq!(m.records[1].instances[0].transcription.as_deref(), Some("Tiny"));

    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    assert!(matches!(
        import_icdar(&empty, &imgs),
        Err(ostf::Error::Core(ostf_core::Error::EmptyManifest))
    ));
    assert!(matches!(import_icdar(&dir.path().join("nope"), &imgs), Err(ostf::Error::Io { .. })));
}

#[test]
fn session_registry_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let stats = TamperingMethod::Dst.reference_stats();
    let (train, test) = common::session_manifests(TamperingMethod::Dst, &stats);
    let reg = common::write_registry(dir.path(), &[(TamperingMethod::Dst, train.clone(), test)]);
    let sessions = read_sessions(&reg).unwrap();
    assert_eq!(sessions.len(), 1);
    assert_eq!(sessions[0].method, TamperingMethod::Dst);
    assert_eq!(sessions[0].train, train);

    fs::write(dir.path().join("bad.json"), r#"{"Nope": {"train": "a", "test": "b"}}"#).unwrap();
    assert!(read_sessions(&dir.path().join("bad.json")).is_err());
}

#[test]
fn manifest_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = Manifest::new(common::records("x", 2, 1, 3, 2));
    let p = dir.path().join("sub/m.jsonl");
    write_manifest(&p, &m).unwrap();
    assert_eq!(read_manifest(&p).unwrap(), m);
}
