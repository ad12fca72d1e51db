//! Annotation schema, ICDAR ground-truth parsing, OSTF sessions and
//! statistics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Add;

use serde::{Deserialize, Serialize};

use crate::geometry::{BBox, Point, Quad};

/// Manifest schema version written in the header line.
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FORMAT: &str = "ostf-manifest";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    #[serde(alias = "real")]
    Authentic,
    #[serde(alias = "fake")]
    Tampered,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Authentic, Label::Tampered];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Authentic => "authentic",
            Label::Tampered => "tampered",
        }
    }
}

/// Annotated region geometry, kept exactly as ingested.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Quad(Quad),
    #[serde(rename = "bbox")]
    Box(BBox),
}

impl Geometry {
    pub fn bbox(&self) -> BBox {
        match self {
            Geometry::Quad(q) => q.bbox(),
            Geometry::Box(b) => *b,
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Geometry::Quad(q) => q.is_finite(),
            Geometry::Box(b) => b.is_finite(),
        }
    }

    pub fn scale(&self, sx: f64, sy: f64) -> Geometry {
        match self {
            Geometry::Quad(q) => Geometry::Quad(Quad(q.0.map(|p| Point::new(p.x * sx, p.y * sy)))),
            Geometry::Box(b) => Geometry::Box(b.scale(sx, sy)),
        }
    }
}

/// One annotated text region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextInstance {
    #[serde(flatten)]
    pub geometry: Geometry,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcription: Option<String>,
}

impl TextInstance {
    pub fn authentic(geometry: Geometry) -> Self {
        Self {
            geometry,
            label: Label::Authentic,
            transcription: None,
        }
    }

    pub fn bbox(&self) -> BBox {
        self.geometry.bbox()
    }
}

/// All annotations for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub image: String,
    pub width: u32,
    pub height: u32,
    pub instances: Vec<TextInstance>,
}

impl Record {
    pub fn has_tampered(&self) -> bool {
        self.instances.iter().any(|i| i.label == Label::Tampered)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub metadata: BTreeMap<String, String>,
    pub records: Vec<Record>,
}

impl Manifest {
    pub fn new(records: Vec<Record>) -> Self {
        Self {
            metadata: BTreeMap::new(),
            records,
        }
    }

    pub fn get(&self, image: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.image == image)
    }
}

/// A line the ICDAR parser could not use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineWarning {
    /// 1-based.
    pub line: usize,
    pub reason: String,
}

/// Parses one ICDAR-style ground-truth file.
///
/// Each line is `x1,y1,...,x4,y4,transcription` (quad) or
/// `x1,y1,x2,y2,transcription` (two corners). Whitespace-separated lines as
/// used by ICDAR 2013 are accepted when the line has no comma. The geometry
/// form is chosen from the count of leading numeric fields: at least 8 means
/// quad, at least 4 means box. Everything after the numbers is the
/// transcription, surrounding quotes stripped.
pub fn parse_icdar_gt(text: &str) -> (Vec<TextInstance>, Vec<LineWarning>) {
    let mut instances = Vec::new();
    let mut warnings = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_start_matches('\u{feff}').trim();
        if line.is_empty() {
            continue;
        }
        match parse_icdar_line(line) {
            Ok(inst) => instances.push(inst),
            Err(reason) => warnings.push(LineWarning { line: i + 1, reason }),
        }
    }
    (instances, warnings)
}

fn parse_icdar_line(line: &str) -> Result<TextInstance, String> {
    let fields: Vec<&str> = if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    };
    let numbers: Vec<f64> = fields
        .iter()
        .map_while(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect();
    let sep = if line.contains(',') { "," } else { " " };
    let (geometry, used) = if numbers.len() >= 8 {
        let n = &numbers;
        let quad = Quad::from([[n[0], n[1]], [n[2], n[3]], [n[4], n[5]], [n[6], n[7]]]);
        (Geometry::Quad(quad), 8)
    } else if numbers.len() >= 4 {
        let (x0, y0, x1, y1) = (numbers[0], numbers[1], numbers[2], numbers[3]);
        let b = BBox::new(x0.min(x1), y0.min(y1), (x1 - x0).abs(), (y1 - y0).abs());
        (Geometry::Box(b), 4)
    } else {
        return Err(format!("expected 4 or 8 leading coordinates, found {}", numbers.len()));
    };
    let rest = fields[used..].join(sep);
    let rest = rest.trim();
    let transcription = rest
        .strip_prefix('"')
        .and_then(|r| r.strip_suffix('"'))
        .unwrap_or(rest);
    Ok(TextInstance {
        geometry,
        label: Label::Authentic,
        transcription: (!transcription.is_empty()).then(|| transcription.to_string()),
    })
}

/// The nine tampering methods / sessions of the benchmark, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TamperingMethod {
    #[serde(rename = "DST")]
    Dst,
    #[serde(rename = "SRNet")]
    SrNet,
    #[serde(rename = "STEFANN")]
    Stefann,
    #[serde(rename = "MOSTEL")]
    Mostel,
    #[serde(rename = "DiffSTE")]
    DiffSte,
    #[serde(rename = "AnyText")]
    AnyText,
    #[serde(rename = "UDiffText_IC13")]
    UDiffTextIc13,
    #[serde(rename = "UDiffText_TextOCR")]
    UDiffTextTextOcr,
    #[serde(rename = "TextDiffuser")]
    TextDiffuser,
}

impl TamperingMethod {
    pub const ALL: [TamperingMethod; 9] = [
        TamperingMethod::Dst,
        TamperingMethod::SrNet,
        TamperingMethod::Stefann,
        TamperingMethod::Mostel,
        TamperingMethod::DiffSte,
        TamperingMethod::AnyText,
        TamperingMethod::UDiffTextIc13,
        TamperingMethod::UDiffTextTextOcr,
        TamperingMethod::TextDiffuser,
    ];

    /// Canonical session name.
    pub fn name(self) -> &'static str {
        match self {
            TamperingMethod::Dst => "DST",
            TamperingMethod::SrNet => "SRNet",
            TamperingMethod::Stefann => "STEFANN",
            TamperingMethod::Mostel => "MOSTEL",
            TamperingMethod::DiffSte => "DiffSTE",
            TamperingMethod::AnyText => "AnyText",
            TamperingMethod::UDiffTextIc13 => "UDiffText_IC13",
            TamperingMethod::UDiffTextTextOcr => "UDiffText_TextOCR",
            TamperingMethod::TextDiffuser => "TextDiffuser",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(name))
    }

    pub fn source_dataset(self) -> &'static str {
        match self {
            TamperingMethod::UDiffTextTextOcr => "TextOCR val",
            TamperingMethod::TextDiffuser => "IC17, ReCTS val",
            _ => "ICDAR 2013",
        }
    }

    /// Position in the 9×9 matrix.
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&m| m == self).unwrap_or(0)
    }

    /// Published per-session counts, used by `stats --check`.
    pub fn reference_stats(self) -> DatasetStats {
        // images: authentic train/test, tampered train/test;
        // instances: authentic train/test, tampered train/test.
        let row: [u64; 8] = match self {
            TamperingMethod::Dst => [72, 82, 157, 151, 382, 588, 467, 507],
            TamperingMethod::SrNet => [29, 55, 200, 178, 342, 607, 507, 488],
            TamperingMethod::Stefann => [182, 181, 47, 52, 721, 946, 128, 149],
            TamperingMethod::Mostel => [168, 172, 61, 61, 628, 882, 221, 213],
            TamperingMethod::DiffSte => [174, 181, 55, 52, 683, 943, 166, 152],
            TamperingMethod::AnyText => [181, 191, 48, 42, 715, 974, 134, 121],
            TamperingMethod::UDiffTextIc13 => [129, 132, 100, 101, 471, 772, 378, 323],
            TamperingMethod::UDiffTextTextOcr => [196, 233, 218, 211, 23737, 22886, 419, 399],
            TamperingMethod::TextDiffuser => [40, 40, 123, 123, 2048, 1515, 123, 123],
        };
        DatasetStats::from_row(row)
    }
}

impl core::fmt::Display for TamperingMethod {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub name: String,
    pub method: TamperingMethod,
    pub source_dataset: String,
    pub train: Manifest,
    pub test: Manifest,
}

impl Session {
    pub fn new(method: TamperingMethod, train: Manifest, test: Manifest) -> Self {
        Self {
            name: method.name().to_string(),
            method,
            source_dataset: method.source_dataset().to_string(),
            train,
            test,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: u64,
    pub test: u64,
}

impl SplitCounts {
    pub fn total(&self) -> u64 {
        self.train + self.test
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub authentic: SplitCounts,
    pub tampered: SplitCounts,
}

impl LabelCounts {
    pub fn total(&self) -> u64 {
        self.authentic.total() + self.tampered.total()
    }
}

/// Image and instance counts per label and split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub images: LabelCounts,
    pub instances: LabelCounts,
}

impl DatasetStats {
    fn from_row(r: [u64; 8]) -> Self {
        let lc = |a: &[u64]| LabelCounts {
            authentic: SplitCounts { train: a[0], test: a[1] },
            tampered: SplitCounts { train: a[2], test: a[3] },
        };
        Self {
            images: lc(&r[0..4]),
            instances: lc(&r[4..8]),
        }
    }

    pub fn total_images(&self) -> u64 {
        self.images.total()
    }

    pub fn tampered_images(&self) -> u64 {
        self.images.tampered.total()
    }

    pub fn total_instances(&self) -> u64 {
        self.instances.total()
    }

    pub fn tampered_instances(&self) -> u64 {
        self.instances.tampered.total()
    }
}

impl Add for SplitCounts {
    type Output = SplitCounts;
    fn add(self, o: Self) -> Self {
        SplitCounts {
            train: self.train + o.train,
            test: self.test + o.test,
        }
    }
}

impl Add for LabelCounts {
    type Output = LabelCounts;
    fn add(self, o: Self) -> Self {
        LabelCounts {
            authentic: self.authentic + o.authentic,
            tampered: self.tampered + o.tampered,
        }
    }
}

impl Add for DatasetStats {
    type Output = DatasetStats;
    fn add(self, o: Self) -> Self {
        DatasetStats {
            images: self.images + o.images,
            instances: self.instances + o.instances,
        }
    }
}

impl core::iter::Sum for DatasetStats {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(DatasetStats::default(), Add::add)
    }
}

/// `(authentic images, tampered images, authentic instances, tampered instances)`
fn count_manifest(m: &Manifest) -> [u64; 4] {
    let mut c = [0u64; 4];
    for r in &m.records {
        if r.has_tampered() {
            c[1] += 1;
        } else {
            c[0] += 1;
        }
        for inst in &r.instances {
            match inst.label {
                Label::Authentic => c[2] += 1,
                Label::Tampered => c[3] += 1,
            }
        }
    }
    c
}

/// Counts for one session. An image with at least one tampered instance is a
/// tampered image; every other image is authentic.
pub fn compute_stats(session: &Session) -> DatasetStats {
    let tr = count_manifest(&session.train);
    let te = count_manifest(&session.test);
    DatasetStats::from_row([tr[0], te[0], tr[1], te[1], tr[2], te[2], tr[3], te[3]])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FindingKind {
    DuplicatePath,
    ZeroImageSize,
    DegenerateInstance { instance: usize },
    NonFiniteCoordinate { instance: usize },
    OutOfBounds { instance: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub image: String,
    #[serde(flatten)]
    pub kind: FindingKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }
}

pub fn validate_manifest(manifest: &Manifest) -> ValidationReport {
    let mut findings = Vec::new();
    let mut seen = BTreeSet::new();
    let mut push = |severity, image: &str, kind| {
        findings.push(Finding {
            severity,
            image: image.to_string(),
            kind,
        })
    };
    for r in &manifest.records {
        if !seen.insert(r.image.as_str()) {
            push(Severity::Error, &r.image, FindingKind::DuplicatePath);
        }
        if r.width == 0 || r.height == 0 {
            push(Severity::Error, &r.image, FindingKind::ZeroImageSize);
        }
        for (i, inst) in r.instances.iter().enumerate() {
            if !inst.geometry.is_finite() {
                push(Severity::Error, &r.image, FindingKind::NonFiniteCoordinate { instance: i });
                continue;
            }
            let b = inst.bbox();
            if b.w <= 0.0 || b.h <= 0.0 {
                push(Severity::Error, &r.image, FindingKind::DegenerateInstance { instance: i });
            }
            let (w, h) = (f64::from(r.width), f64::from(r.height));
            if b.x < 0.0 || b.y < 0.0 || b.right() > w || b.bottom() > h {
                push(Severity::Warning, &r.image, FindingKind::OutOfBounds { instance: i });
            }
        }
    }
    ValidationReport { findings }
}
