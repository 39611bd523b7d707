//! File formats: time-series and weather CSVs, scenario directories, JSON
//! reports, run manifests and SVG plots.
//!
//! Canonical time-series CSV:
//!
//! ```text
//! timestamp,kw
//! 2018-06-01T00:00:00Z,1.500000
//! ```
//!
//! Timestamps are ISO-8601 UTC and mark the start of each interval; values are
//! written with six decimals and `\n` line endings.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::Distribution;
use crate::pv::{Channel, PvParams, WeatherBundle};
use crate::scenario::{Home, LoadProfile, ScenarioBundle};
use crate::timeseries::{SiteLocation, TimeSeries, Unit};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

fn parse_timestamp(s: &str, line: usize) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::Parse { line, msg: format!("bad timestamp `{s}`: {e}") })
}

fn parse_value(s: &str, line: usize) -> Result<Option<f64>> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Parse { line, msg: format!("bad value `{s}`") })
}

fn format_value(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(input)
}

/// Header row plus `(line, fields)` for every data row.
fn read_table<R: Read>(input: R) -> Result<(Vec<String>, Vec<(usize, Vec<String>)>)> {
    let mut rdr = reader(input);
    let mut rows = Vec::new();
    let mut header = None;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let fields: Vec<String> = rec.iter().map(str::to_string).collect();
        if header.is_none() {
            header = Some(fields);
        } else {
            rows.push((line, fields));
        }
    }
    let header = header.ok_or(Error::EmptySeries)?;
    Ok((header, rows))
}

pub fn parse_timeseries_csv<R: Read>(input: R) -> Result<TimeSeries> {
    let (header, rows) = read_table(input)?;
    if header.len() != 2 || !header[0].eq_ignore_ascii_case("timestamp") {
        return Err(Error::Parse { line: 1, msg: format!("expected header `timestamp,<unit>`, got `{}`", header.join(",")) });
    }
    let unit: Unit = header[1].parse()?;
    let mut samples = Vec::with_capacity(rows.len());
    for (line, fields) in rows {
        if fields.len() != 2 {
            return Err(Error::Parse { line, msg: format!("expected 2 fields, got {}", fields.len()) });
        }
        samples.push((line, parse_timestamp(&fields[0], line)?, parse_value(&fields[1], line)?));
    }
    TimeSeries::from_samples(samples, unit)
}

pub fn read_timeseries_csv(path: &Path) -> Result<TimeSeries> {
    parse_timeseries_csv(open(path)?)
}

pub fn format_timeseries_csv(ts: &TimeSeries) -> String {
    let mut out = String::with_capacity(32 * (ts.len() + 1));
    let _ = writeln!(out, "timestamp,{}", ts.unit());
    for (t, v) in ts.timestamps().zip(ts.values()) {
        let _ = writeln!(out, "{},{}", t.format(TIMESTAMP_FORMAT), format_value(*v));
    }
    out
}

pub fn write_timeseries_csv(path: &Path, ts: &TimeSeries) -> Result<()> {
    write_file(path, format_timeseries_csv(ts).as_bytes())
}

/// Wide weather CSV: `timestamp` plus any of the channel columns.
pub fn parse_weather_csv<R: Read>(input: R) -> Result<WeatherBundle> {
    let (header, rows) = read_table(input)?;
    if header.first().map(|h| h.eq_ignore_ascii_case("timestamp")) != Some(true) {
        return Err(Error::Parse { line: 1, msg: "first column must be `timestamp`".into() });
    }
    let mut columns = Vec::new();
    for (i, name) in header.iter().enumerate().skip(1) {
        let channel = Channel::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Parse { line: 1, msg: format!("unknown weather column `{name}`") })?;
        columns.push((i, channel));
    }
    let mut samples: Vec<Vec<(usize, DateTime<Utc>, Option<f64>)>> = vec![Vec::with_capacity(rows.len()); columns.len()];
    for (line, fields) in &rows {
        if fields.len() != header.len() {
            return Err(Error::Parse { line: *line, msg: format!("expected {} fields, got {}", header.len(), fields.len()) });
        }
        let t = parse_timestamp(&fields[0], *line)?;
        for (slot, (i, _)) in samples.iter_mut().zip(&columns) {
            slot.push((*line, t, parse_value(&fields[*i], *line)?));
        }
    }
    let mut bundle = WeatherBundle::default();
    for (s, (_, c)) in samples.into_iter().zip(columns) {
        bundle.set(c, TimeSeries::from_samples(s, c.unit())?);
    }
    Ok(bundle)
}

/// Weather from a wide CSV, or from a directory holding one `<channel>.csv`
/// per channel. Missing channels stay unset.
pub fn read_weather(path: &Path) -> Result<WeatherBundle> {
    if !path.is_dir() {
        return parse_weather_csv(open(path)?);
    }
    let mut bundle = WeatherBundle::default();
    for c in Channel::ALL {
        let file = path.join(format!("{}.csv", c.name()));
        if file.exists() {
            bundle.set(c, read_timeseries_csv(&file)?.with_unit(c.unit()));
        }
    }
    Ok(bundle)
}

pub fn format_weather_csv(w: &WeatherBundle) -> Result<String> {
    let present: Vec<(Channel, &TimeSeries)> =
        Channel::ALL.into_iter().filter_map(|c| w.channel(c).ok().map(|s| (c, s))).collect();
    let first = present.first().ok_or(Error::MissingChannel("any"))?.1;
    for (_, s) in &present {
        first.ensure_aligned(s)?;
    }
    let mut out = String::from("timestamp");
    for (c, _) in &present {
        out.push(',');
        out.push_str(c.name());
    }
    out.push('\n');
    for (i, t) in first.timestamps().enumerate() {
        let _ = write!(out, "{}", t.format(TIMESTAMP_FORMAT));
        for (_, s) in &present {
            out.push(',');
            out.push_str(&format_value(s.values()[i]));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_weather_csv(path: &Path, w: &WeatherBundle) -> Result<()> {
    write_file(path, format_weather_csv(w)?.as_bytes())
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_file(path, to_json_string(value)?.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(std::io::BufReader::new(open(path)?))?)
}

// ---------------------------------------------------------------------------
// Scenario directories

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMeta {
    pub location: SiteLocation,
    pub seed: u64,
    pub homes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomeMeta {
    pub id: usize,
    pub params: PvParams,
    pub profile: LoadProfile,
}

pub fn home_dir(dir: &Path, id: usize) -> PathBuf {
    dir.join("homes").join(format!("home_{id:03}"))
}

/// Layout: `scenario.json`, `weather.csv`, and per home
/// `homes/home_NNN/{net,true_load,true_solar}.csv` plus `home.json`.
/// Returns every written file.
pub fn save_scenario(dir: &Path, sc: &ScenarioBundle) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let meta = ScenarioMeta { location: sc.location, seed: sc.seed, homes: sc.homes.len() };
    let p = dir.join("scenario.json");
    write_json(&p, &meta)?;
    written.push(p);
    let p = dir.join("weather.csv");
    write_weather_csv(&p, &sc.weather)?;
    written.push(p);
    for h in &sc.homes {
        let hd = home_dir(dir, h.id);
        let p = hd.join("home.json");
        write_json(&p, &HomeMeta { id: h.id, params: h.params, profile: h.profile })?;
        written.push(p);
        for (name, ts) in [("net", &h.net), ("true_load", &h.true_load), ("true_solar", &h.true_solar)] {
            let p = hd.join(format!("{name}.csv"));
            write_timeseries_csv(&p, ts)?;
            written.push(p);
        }
    }
    Ok(written)
}

pub fn load_scenario(dir: &Path) -> Result<ScenarioBundle> {
    let meta: ScenarioMeta = read_json(&dir.join("scenario.json"))?;
    let weather = read_weather(&dir.join("weather.csv"))?;
    weather.require_all()?;
    let mut homes = Vec::with_capacity(meta.homes);
    for id in 0..meta.homes {
        let hd = home_dir(dir, id);
        let hm: HomeMeta = read_json(&hd.join("home.json"))?;
        let net = read_timeseries_csv(&hd.join("net.csv"))?;
        let true_load = read_timeseries_csv(&hd.join("true_load.csv"))?;
        let true_solar = read_timeseries_csv(&hd.join("true_solar.csv"))?;
        net.ensure_aligned(&true_load)?;
        net.ensure_aligned(&true_solar)?;
        weather.channel(Channel::Temp)?.ensure_aligned(&net)?;
        homes.push(Home { id, params: hm.params, profile: hm.profile, true_load, true_solar, net });
    }
    if homes.is_empty() {
        return Err(Error::InsufficientData("scenario has no homes".into()));
    }
    Ok(ScenarioBundle { location: meta.location, weather, homes, seed: meta.seed })
}

// ---------------------------------------------------------------------------
// Manifests

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

impl Artifact {
    /// Hashes `path`; `display` is the name recorded in the manifest.
    pub fn of(path: &Path, display: &str) -> Result<Self> {
        let digest = Sha256::digest(fs::read(path)?);
        Ok(Artifact { path: display.to_string(), sha256: hex::encode(digest.as_slice()) })
    }
}

/// Everything needed to reproduce a CLI run. Contains no wall-clock data so
/// repeated runs produce identical manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<Artifact>,
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>, config: serde_json::Value) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        if path.is_dir() {
            let mut files = Vec::new();
            collect_files(path, &mut files)?;
            for f in files {
                let rel = f.strip_prefix(path).unwrap_or(&f);
                self.inputs.push(Artifact::of(&f, &format!("{}/{}", path.display(), rel.display()))?);
            }
            return Ok(());
        }
        self.inputs.push(Artifact::of(path, &path.display().to_string())?);
        Ok(())
    }

    /// Records an output under its path relative to `root`.
    pub fn add_output(&mut self, path: &Path, root: &Path) -> Result<()> {
        let rel = path.strip_prefix(root).unwrap_or(path);
        self.outputs.push(Artifact::of(path, &rel.display().to_string())?);
        Ok(())
    }
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// SVG plots

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    lo: f64,
    hi: f64,
}

impl Frame {
    fn new(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        lo = lo.min(0.0);
        if hi - lo < 1e-12 {
            hi = lo + 1.0;
        }
        Frame { lo, hi: hi + 0.05 * (hi - lo) }
    }

    fn y(&self, v: f64) -> f64 {
        H - MARGIN_B - (v - self.lo) / (self.hi - self.lo) * (H - MARGIN_T - MARGIN_B)
    }
}

fn svg_open(out: &mut String, title: &str, y_label: &str, frame: &Frame) {
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    let _ = writeln!(out, r#"<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{:.1}" stroke="black"/>"#, H - MARGIN_B);
    let _ = writeln!(out, r#"<line x1="{MARGIN_L}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#, H - MARGIN_B, W - MARGIN_R, H - MARGIN_B);
    for i in 0..=4 {
        let v = frame.lo + (frame.hi - frame.lo) * i as f64 / 4.0;
        let y = frame.y(v);
        let _ = writeln!(out, r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, MARGIN_L, W - MARGIN_R);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.3}</text>"#, MARGIN_L - 6.0, y + 4.0);
    }
}

/// One box per group: quartile box, median line, 1.5·IQR whiskers.
pub fn box_plot_svg(title: &str, y_label: &str, groups: &[(String, Distribution)]) -> String {
    let frame = Frame::new(groups.iter().flat_map(|(_, d)| [d.whisker_low, d.whisker_high]));
    let mut out = String::new();
    svg_open(&mut out, title, y_label, &frame);
    let slot = (W - MARGIN_L - MARGIN_R) / groups.len().max(1) as f64;
    for (i, (name, d)) in groups.iter().enumerate() {
        let cx = MARGIN_L + slot * (i as f64 + 0.5);
        let half = (slot * 0.3).min(40.0);
        let color = PALETTE[i % PALETTE.len()];
        let (q1, q3, med) = (frame.y(d.q1), frame.y(d.q3), frame.y(d.median));
        let (lo, hi) = (frame.y(d.whisker_low), frame.y(d.whisker_high));
        let _ = writeln!(out, r#"<line x1="{cx:.1}" y1="{hi:.1}" x2="{cx:.1}" y2="{q3:.1}" stroke="black"/>"#);
        let _ = writeln!(out, r#"<line x1="{cx:.1}" y1="{q1:.1}" x2="{cx:.1}" y2="{lo:.1}" stroke="black"/>"#);
        for y in [lo, hi] {
            let _ = writeln!(out, r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="black"/>"#, cx - half / 2.0, cx + half / 2.0);
        }
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{q3:.1}" width="{:.1}" height="{:.1}" fill="{color}" fill-opacity="0.35" stroke="{color}"/>"#,
            cx - half,
            2.0 * half,
            (q1 - q3).max(0.5)
        );
        let _ = writeln!(out, r#"<line x1="{:.1}" y1="{med:.1}" x2="{:.1}" y2="{med:.1}" stroke="black" stroke-width="2"/>"#, cx - half, cx + half);
        let _ = writeln!(out, r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, H - MARGIN_B + 18.0, escape(name));
    }
    out.push_str("</svg>\n");
    out
}

/// Lines over a shared categorical x axis.
pub fn line_plot_svg(title: &str, x_label: &str, y_label: &str, x: &[String], series: &[(String, Vec<f64>)]) -> String {
    let frame = Frame::new(series.iter().flat_map(|(_, v)| v.iter().copied()));
    let mut out = String::new();
    svg_open(&mut out, title, y_label, &frame);
    let slot = (W - MARGIN_L - MARGIN_R) / x.len().max(1) as f64;
    let px = |i: usize| MARGIN_L + slot * (i as f64 + 0.5);
    for (i, label) in x.iter().enumerate() {
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, px(i), H - MARGIN_B + 18.0, escape(label));
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, W / 2.0, H - 14.0, escape(x_label));
    for (k, (name, values)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(i, v)| format!("{:.1},{:.1}", px(i), frame.y(*v)))
            .collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, points.join(" "));
        for p in &points {
            let (x, y) = p.split_once(',').expect("formatted pair");
            let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
        }
        let ly = MARGIN_T + 14.0 * k as f64;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{ly:.1}" fill="{color}" text-anchor="end">{}</text>"#, W - MARGIN_R - 4.0, escape(name));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, ScenarioConfig};
    use crate::timeseries::Step;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn parse(s: &str) -> Result<TimeSeries> {
        parse_timeseries_csv(s.as_bytes())
    }

    #[test]
    fn two_row_file() {
        let ts = parse("timestamp,kw\n2018-06-01T00:00:00Z,1.5\n2018-06-01T00:30:00Z,2.0").unwrap();
        assert_eq!(ts.step(), Step::from_minutes(30).unwrap());
        assert_eq!(ts.values(), &[1.5, 2.0]);
        assert_eq!(ts.unit(), Unit::Kw);
        assert_eq!(ts.start(), Utc.with_ymd_and_hms(2018, 6, 1, 0, 0, 0).unwrap());
    }

    #[test]
    fn shuffled_rows_sort_on_ingest() {
        let a = parse("timestamp,kw\n2018-06-01T00:00:00Z,1\n2018-06-01T00:30:00Z,2\n2018-06-01T01:00:00Z,3\n").unwrap();
        let b = parse("timestamp,kw\n2018-06-01T01:00:00Z,3\n2018-06-01T00:00:00Z,1\n2018-06-01T00:30:00Z,2\n").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_timestamp_names_the_line() {
        let err = parse("timestamp,kw\n2018-06-01T00:00:00Z,1\n2018-06-01T00:30:00Z,2\n2018-06-01T00:00:00Z,3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err:?}");
        assert!(err.to_string().contains("line 4"), "{err}");
    }

    #[test]
    fn header_and_value_errors() {
        assert!(matches!(parse("timestamp,furlongs\n2018-06-01T00:00:00Z,1\n"), Err(Error::UnitUnknown(_))));
        assert!(matches!(parse("time,kw\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("timestamp,kw\n2018-06-01T00:00:00Z,abc\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("timestamp,kw\nyesterday,1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(
            parse("timestamp,kw\n2018-06-01T00:00:00Z,1\n2018-06-01T00:30:00Z,1\n2018-06-01T00:45:30Z,1\n"),
            Err(Error::NonUniformStep { .. })
        ));
    }

    #[test]
    fn short_gaps_are_interpolated() {
        let ts = parse("timestamp,kw\n2018-06-01T00:00:00Z,1\n2018-06-01T00:30:00Z,\n2018-06-01T01:30:00Z,4\n").unwrap();
        assert_eq!(ts.values(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn offsets_convert_to_utc() {
        let ts = parse("timestamp,kw\n2018-06-01T00:00:00-05:00,1\n2018-06-01T00:30:00-05:00,1\n").unwrap();
        assert_eq!(ts.start(), Utc.with_ymd_and_hms(2018, 6, 1, 5, 0, 0).unwrap());
    }

    #[test]
    fn weather_round_trip_and_directory_form() {
        let sc = generate_scenario(&ScenarioConfig { n_homes: 2, days: 2, ..ScenarioConfig::default() }).unwrap();
        let text = format_weather_csv(&sc.weather).unwrap();
        assert!(text.starts_with("timestamp,temp_c,wind_ms,dni,dhi,ghi\n"));
        let back = parse_weather_csv(text.as_bytes()).unwrap();
        assert_eq!(format_weather_csv(&back).unwrap(), text);

        let dir = tempfile::tempdir().unwrap();
        for c in Channel::ALL {
            write_timeseries_csv(&dir.path().join(format!("{}.csv", c.name())), back.channel(c).unwrap()).unwrap();
        }
        let from_dir = read_weather(dir.path()).unwrap();
        assert_eq!(format_weather_csv(&from_dir).unwrap(), text);
        assert!(parse_weather_csv("timestamp,humidity\n".as_bytes()).is_err());
    }

    #[test]
    fn scenario_directory_round_trip() {
        let sc = generate_scenario(&ScenarioConfig { n_homes: 3, days: 2, ..ScenarioConfig::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = save_scenario(dir.path(), &sc).unwrap();
        assert_eq!(files.len(), 2 + 3 * 4);
        let back = load_scenario(dir.path()).unwrap();
        assert_eq!(back.homes.len(), 3);
        assert_eq!(back.location, sc.location);
        assert_eq!(back.homes[1].params, sc.homes[1].params);
        for (a, b) in back.homes[2].net.values().iter().zip(sc.homes[2].net.values()) {
            assert!((a - b).abs() <= 5e-7);
        }
        let again = tempfile::tempdir().unwrap();
        save_scenario(again.path(), &back).unwrap();
        for f in &files {
            let rel = f.strip_prefix(dir.path()).unwrap();
            assert_eq!(fs::read(f).unwrap(), fs::read(again.path().join(rel)).unwrap(), "{}", rel.display());
        }
    }

    #[test]
    fn manifest_hashes_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        fs::write(&p, b"abc").unwrap();
        let mut m = Manifest::new("eval", Some(3), serde_json::json!({}));
        m.add_output(&p, dir.path()).unwrap();
        assert_eq!(m.outputs[0].path, "a.txt");
        assert_eq!(m.outputs[0].sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn plots_are_well_formed() {
        let d = Distribution::of(&[0.1, 0.2, 0.3, 0.5]).unwrap();
        let svg = box_plot_svg("solar <nRMSE>", "nRMSE", &[("3proxies".into(), d.clone()), ("3sp".into(), d)]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 3);
        assert!(svg.contains("&lt;nRMSE&gt;"));
        let svg = line_plot_svg("sweep", "T", "nRMSE", &["48".into(), "1440".into()], &[("ours".into(), vec![0.4, f64::NAN])]);
        assert_eq!(svg.matches("<circle").count(), 1);
    }

    proptest! {
        #[test]
        fn canonical_files_round_trip_byte_identical(
            values in prop::collection::vec(-1000.0f64..1000.0, 1..60),
            step in prop::sample::select(vec![1u32, 15, 30, 60]),
        ) {
            let start = Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap();
            let ts = TimeSeries::new(start, Step::from_minutes(step).unwrap(), values, Unit::Kw).unwrap();
            let canonical = format_timeseries_csv(&ts);
            let reread = parse(&canonical).unwrap();
            prop_assert_eq!(format_timeseries_csv(&reread), canonical);
        }
    }
}
