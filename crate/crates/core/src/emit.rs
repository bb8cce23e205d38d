//! Artifact writers: deterministic JSON, Graphviz DOT, a static SVG of the
//! strip, and a hashed manifest.

use std::fmt::Write as _;
use std::io;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::gdnf::Gdnf;
use crate::predigraph::{VertexKind, WindowedPreDigraph};
use crate::sweep::Strip;

pub const SCHEMA: u32 = 1;

/// Pretty JSON with every float written as `d.dddddddddddddddde±x`
/// (17 significant digits), so equal inputs give byte-identical files.
struct FixedFloats(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes with the fixed float format; non-finite floats become `null`.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

/// Directed GDNF; edges carry the NF value they come from, dangling ends
/// are drawn as point nodes.
pub fn gdnf_dot(d: &Gdnf, name: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "digraph \"{}\" {{", name.replace('"', "'"));
    let _ = writeln!(s, "  rankdir=BT;");
    let _ = writeln!(s, "  node [shape=circle];");
    for c in &d.classes {
        let _ = writeln!(s, "  c{} [label=\"C{}\\n{} comp.\"];", c.id, c.id, c.members.len());
    }
    for e in &d.edges {
        let mut end = |v: Option<usize>, tag: &str| match v {
            Some(c) => format!("c{c}"),
            None => {
                let id = format!("open{}_{tag}", e.id);
                let _ = writeln!(s, "  {id} [shape=point];");
                id
            }
        };
        let from = end(e.from, "from");
        let to = end(e.to, "to");
        let _ = writeln!(s, "  {from} -> {to} [label=\"NF {}\"];", num(e.nf_value));
    }
    s.push_str("}\n");
    s
}

/// Windowed pre-digraph with vertex values; NF vertices are doubled circles.
pub fn graph_dot(g: &WindowedPreDigraph, name: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "digraph \"{}\" {{", name.replace('"', "'"));
    let _ = writeln!(s, "  rankdir=BT;");
    for v in &g.vertices {
        let shape = match v.kind {
            _ if g.is_nf(v.id) => "doublecircle",
            VertexKind::NoncompactContour => "circle",
            VertexKind::WindowBoundary => "box",
            VertexKind::Pole => "diamond",
            VertexKind::Critical => "point",
        };
        let _ = writeln!(s, "  v{} [shape={shape}, xlabel=\"{}\"];", v.id, num(v.value));
    }
    for e in &g.edges {
        match e.head {
            Some(h) => {
                let _ = writeln!(s, "  v{} -> v{};", e.tail, h);
            }
            None => {
                let _ = writeln!(s, "  open{} [shape=point];\n  v{} -> open{};", e.id, e.tail, e.id);
            }
        }
    }
    s.push_str("}\n");
    s
}

/// Static figure: both boundary curves over the window, the region between
/// them shaded, critical levels in grey and NF levels dashed red.
pub fn strip_svg(strip: &Strip, g: &WindowedPreDigraph, title: &str) -> String {
    const W: f64 = 800.0;
    const H: f64 = 500.0;
    const PAD: f64 = 40.0;
    const N: usize = 1200;
    let win = g.window;
    let xs: Vec<f64> = (0..=N).map(|i| win.lo() + win.width() * i as f64 / N as f64).collect();
    let curve = |f: &crate::expr::Expr| -> Vec<f64> { xs.iter().map(|&x| f.eval(x).unwrap_or(f64::NAN)).collect() };
    let (y1, y2) = (curve(&strip.c1), curve(&strip.c2));
    let values = g.vertices.iter().map(|v| v.value).chain(y1.iter().chain(&y2).copied());
    let (mut lo, mut hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(lo < hi) {
        lo -= 1.0;
        hi += 1.0;
    }
    let margin = 0.05 * (hi - lo);
    let (lo, hi) = (lo - margin, hi + margin);
    let px = |x: f64| PAD + (x - win.lo()) / win.width() * (W - 2.0 * PAD);
    let py = |t: f64| H - PAD - (t - lo) / (hi - lo) * (H - 2.0 * PAD);
    let path = |ys: &[f64]| -> String {
        xs.iter()
            .zip(ys)
            .filter(|(_, y)| y.is_finite())
            .enumerate()
            .map(|(i, (&x, &y))| format!("{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, px(x), py(y)))
            .collect()
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(s, "<title>{}</title>", title.replace('&', "&amp;").replace('<', "&lt;"));
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let mut region: String = path(&y1);
    for (&x, &y) in xs.iter().zip(&y2).rev().filter(|(_, y)| y.is_finite()) {
        let _ = write!(region, " L{:.2},{:.2}", px(x), py(y));
    }
    let _ = writeln!(s, "<path d=\"{region} Z\" fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\"/>");
    let mut levels: Vec<(f64, bool)> = g.vertices.iter().map(|v| (v.value, g.is_nf(v.id))).collect();
    levels.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    levels.dedup_by(|b, a| a.0 == b.0 && a.1 == b.1);
    for (t, nf) in levels {
        let style = if nf {
            "stroke=\"#d62728\" stroke-width=\"1.2\" stroke-dasharray=\"6,3\""
        } else {
            "stroke=\"#999999\" stroke-width=\"0.4\""
        };
        let _ = writeln!(
            s,
            "<line x1=\"{PAD}\" x2=\"{:.2}\" y1=\"{y:.2}\" y2=\"{y:.2}\" {style}/>",
            W - PAD,
            y = py(t)
        );
    }
    let _ = writeln!(s, "<path d=\"{}\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"1\"/>", path(&y1));
    let _ = writeln!(s, "<path d=\"{}\" fill=\"none\" stroke=\"#a63603\" stroke-width=\"1\"/>", path(&y2));
    let _ = writeln!(
        s,
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let label = |x: f64, y: f64, anchor: &str, text: String| {
        format!("<text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"11\" font-family=\"sans-serif\" text-anchor=\"{anchor}\">{text}</text>\n")
    };
    s.push_str(&label(PAD, H - PAD + 14.0, "start", num(win.lo())));
    s.push_str(&label(W - PAD, H - PAD + 14.0, "end", num(win.hi())));
    s.push_str(&label(PAD - 4.0, py(lo + margin) + 4.0, "end", format!("{:.2}", lo + margin)));
    s.push_str(&label(PAD - 4.0, py(hi - margin) + 4.0, "end", format!("{:.2}", hi - margin)));
    s.push_str(&label(W / 2.0, PAD - 12.0, "middle", title.replace('&', "&amp;").replace('<', "&lt;")));
    s.push_str("</svg>\n");
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub schema: u32,
    pub spec: String,
    pub command: String,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(spec: &str, command: &str) -> Self {
        Manifest {
            schema: SCHEMA,
            spec: spec.to_string(),
            command: command.to_string(),
            files: Vec::new(),
        }
    }

    pub fn add(&mut self, path: &str, contents: &[u8]) {
        self.files.push(ManifestEntry {
            path: path.to_string(),
            bytes: contents.len(),
            sha256: sha256_hex(contents),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gdnf::{GdnfClass, GdnfEdge, Policy};

    #[test]
    fn floats_have_seventeen_digits() {
        #[derive(Serialize)]
        struct S {
            a: f64,
            b: Vec<f64>,
        }
        let out = to_json(&S {
            a: 0.1,
            b: vec![-0.5, f64::INFINITY],
        });
        assert!(out.contains("1.0000000000000001e-1"), "{out}");
        assert!(out.contains("-5.0000000000000000e-1"));
        assert!(out.contains("null"));
        let back: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
    }

    #[test]
    fn dot_marks_dangling_ends() {
        let d = Gdnf {
            policy: Policy::ClusterRestricted,
            classes: vec![GdnfClass { id: 0, members: vec![0] }],
            edges: vec![GdnfEdge {
                id: 0,
                nf_vertex: 3,
                nf_value: 0.0,
                from: None,
                to: Some(0),
            }],
        };
        let dot = gdnf_dot(&d, "P2");
        assert!(dot.contains("open0_from [shape=point]"));
        assert!(dot.contains("open0_from -> c0 [label=\"NF 0.000000\"]"));
    }

    #[test]
    fn manifest_hashes() {
        let mut m = Manifest::new("P1", "classify");
        m.add("a.json", b"abc");
        assert_eq!(
            m.files[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
