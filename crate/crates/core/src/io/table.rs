//! Versioned text tables: a `key = value` header, a `---` separator, a
//! column line, then comma-separated rows. Reals are written with 17
//! significant digits so every weight reads back bit-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::dp::PolicyTable;
use crate::error::{Error, Result};
use crate::grid::BeliefGrid;
use crate::lmcts::{BeliefPool, LookupTable, PathPool};
use crate::market::Allocation;
use crate::ntz::{NtzLayout, NtzParams};

pub const TABLE_VERSION: u32 = 1;
const MAGIC: &str = "# regime-alloc table";
const SEPARATOR: &str = "---";

/// Header of a table file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Header {
    pub fields: BTreeMap<String, String>,
}

impl Header {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.get(key).map(|s| s.as_str())
    }

    fn set(&mut self, key: &str, value: impl ToString) {
        self.fields.insert(key.to_string(), value.to_string());
    }
}

/// Text form of one kind of table.
pub trait TableData: Sized {
    const KIND: &'static str;
    fn header(&self, h: &mut Header);
    fn columns(&self) -> Vec<String>;
    fn write_rows(&self, out: &mut String);
    fn read(reader: &mut TableReader) -> Result<Self>;
}

pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_reals(out: &mut String, xs: &[f64]) {
    for x in xs {
        out.push(',');
        out.push_str(&fmt_real(*x));
    }
}

/// Writes `table` atomically. `extra` entries are added to the header for
/// provenance (seed, configuration echo).
pub fn save_table<T: TableData>(path: impl AsRef<Path>, table: &T, extra: &[(&str, String)]) -> Result<()> {
    let path = path.as_ref();
    let mut h = Header::default();
    for (k, v) in extra {
        h.set(k, v);
    }
    h.set("version", TABLE_VERSION);
    h.set("kind", T::KIND);
    table.header(&mut h);
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    for (k, v) in &h.fields {
        let _ = writeln!(out, "{k} = {v}");
    }
    out.push_str(SEPARATOR);
    out.push('\n');
    out.push_str(&table.columns().join(","));
    out.push('\n');
    table.write_rows(&mut out);
    write_atomic(path, out.as_bytes())
}

/// Writes through a temporary file in the target directory and renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn load_table<T: TableData>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = TableReader::new(path, &text)?;
    if reader.header.get("kind") != Some(T::KIND) {
        return Err(reader.err(1, format!("kind is {:?}, expected {}", reader.header.get("kind"), T::KIND)));
    }
    T::read(&mut reader)
}

/// Reads only the header of a table file.
pub fn read_header(path: impl AsRef<Path>) -> Result<Header> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(TableReader::new(path, &text)?.header)
}

/// Parsed header plus the remaining rows with their line numbers.
pub struct TableReader {
    path: PathBuf,
    pub header: Header,
    rows: Vec<(usize, Vec<String>)>,
    columns: usize,
}

impl TableReader {
    fn new(path: &Path, text: &str) -> Result<Self> {
        let err = |line: usize, reason: String| Error::Table { path: path.to_path_buf(), line, reason };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l.trim() == MAGIC => {}
            _ => return Err(err(1, "not a table file".into())),
        }
        let mut header = Header::default();
        let mut separated = false;
        for (n, line) in lines.by_ref() {
            let line = line.trim();
            if line == SEPARATOR {
                separated = true;
                break;
            }
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| err(n, format!("malformed header line `{line}`")))?;
            header.fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        if !separated {
            return Err(err(1, "header is not terminated".into()));
        }
        let version = header.get("version").ok_or_else(|| err(1, "header has no version".into()))?;
        let found: u32 = version.parse().map_err(|_| err(1, format!("bad version `{version}`")))?;
        if found != TABLE_VERSION {
            return Err(Error::Version { path: path.to_path_buf(), found, expected: TABLE_VERSION });
        }
        let (_, cols) = lines.next().ok_or_else(|| err(1, "missing column line".into()))?;
        let columns = cols.split(',').count();
        let rows = lines
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(n, l)| (n, l.split(',').map(|f| f.trim().to_string()).collect()))
            .collect();
        Ok(TableReader { path: path.to_path_buf(), header, rows, columns })
    }

    pub fn err(&self, line: usize, reason: impl Into<String>) -> Error {
        Error::Table { path: self.path.clone(), line, reason: reason.into() }
    }

    pub fn field<F: std::str::FromStr>(&self, key: &str) -> Result<F> {
        let raw = self.header.get(key).ok_or_else(|| self.err(1, format!("header has no `{key}`")))?;
        raw.parse().map_err(|_| self.err(1, format!("header `{key}` has bad value `{raw}`")))
    }

    pub fn reals(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.header.get(key).ok_or_else(|| self.err(1, format!("header has no `{key}`")))?;
        raw.split_whitespace()
            .map(|x| x.parse().map_err(|_| self.err(1, format!("header `{key}` has bad value `{x}`"))))
            .collect()
    }

    /// Rows, each checked against the column line.
    pub fn rows(&self) -> Result<Vec<Row<'_>>> {
        self.rows
            .iter()
            .map(|(line, fields)| {
                if fields.len() != self.columns {
                    Err(self.err(*line, format!("row {line} has {} fields, header declares {}", fields.len(), self.columns)))
                } else {
                    Ok(Row { reader: self, line: *line, fields })
                }
            })
            .collect()
    }
}

pub struct Row<'a> {
    reader: &'a TableReader,
    pub line: usize,
    fields: &'a [String],
}

impl Row<'_> {
    pub fn get<F: std::str::FromStr>(&self, i: usize) -> Result<F> {
        let raw = &self.fields[i];
        raw.parse().map_err(|_| self.reader.err(self.line, format!("row {}: bad value `{raw}` in column {}", self.line, i + 1)))
    }

    pub fn reals(&self, range: std::ops::Range<usize>) -> Result<Vec<f64>> {
        range.map(|i| self.get(i)).collect()
    }

    pub fn err(&self, reason: impl Into<String>) -> Error {
        self.reader.err(self.line, format!("row {}: {}", self.line, reason.into()))
    }
}

fn grid_from(r: &TableReader) -> Result<BeliefGrid> {
    let regimes: usize = r.field("regimes")?;
    let divisions: u32 = r.field("divisions")?;
    if regimes == 0 || divisions == 0 {
        return Err(r.err(1, "grid needs at least one regime and one division"));
    }
    Ok(BeliefGrid::with_divisions(regimes, divisions))
}

fn grid_header(h: &mut Header, grid: &BeliefGrid) {
    h.set("regimes", grid.n_regimes());
    h.set("divisions", grid.divisions());
    h.set("grid_step", fmt_real(grid.step()));
}

fn belief_columns(grid: &BeliefGrid) -> Vec<String> {
    (0..grid.n_regimes()).map(|k| format!("p{k}")).collect()
}

fn weight_columns(n: usize) -> Vec<String> {
    let mut c: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
    c.push("cash".into());
    c
}

/// Checks `t`, `b` and belief coordinates of a row; returns `(t, b)`.
fn key_of(row: &Row, grid: &BeliefGrid, t_max: usize) -> Result<(usize, usize)> {
    let (t, b): (usize, usize) = (row.get(0)?, row.get(1)?);
    if t > t_max {
        return Err(row.err(format!("t = {t} beyond {t_max}")));
    }
    if b >= grid.len() {
        return Err(row.err(format!("belief index {b} outside a grid of {}", grid.len())));
    }
    let p = row.reals(2..2 + grid.n_regimes())?;
    if p.iter().zip(grid.point(b).probs()).any(|(a, c)| (a - c).abs() > 1e-12) {
        return Err(row.err(format!("belief coordinates do not match grid point {b}")));
    }
    Ok((t, b))
}

fn weights_of(row: &Row, start: usize, n: usize) -> Result<Allocation> {
    let w = row.reals(start..start + n + 1)?;
    Allocation::new(w).map_err(|e| row.err(e.to_string()))
}

impl TableData for LookupTable {
    const KIND: &'static str = "lookup";

    fn header(&self, h: &mut Header) {
        h.set("horizon", self.horizon());
        grid_header(h, self.grid());
        let n = (0..self.horizon()).find_map(|t| self.stage(t)).map_or(0, |s| s[0].n_risky());
        h.set("assets", n);
    }

    fn columns(&self) -> Vec<String> {
        let n = (0..self.horizon()).find_map(|t| self.stage(t)).map_or(0, |s| s[0].n_risky());
        let mut c = vec!["t".to_string(), "belief".to_string()];
        c.extend(belief_columns(self.grid()));
        c.extend(weight_columns(n));
        c
    }

    fn write_rows(&self, out: &mut String) {
        for t in 0..self.horizon() {
            if let Some(stage) = self.stage(t) {
                for (b, a) in stage.iter().enumerate() {
                    let _ = write!(out, "{t},{b}");
                    push_reals(out, self.grid().point(b).probs());
                    push_reals(out, a.weights());
                    out.push('\n');
                }
            }
        }
    }

    fn read(r: &mut TableReader) -> Result<Self> {
        let horizon: usize = r.field("horizon")?;
        let grid = grid_from(r)?;
        let n: usize = r.field("assets")?;
        let expected = 2 + grid.n_regimes() + n + 1;
        if r.columns != expected {
            return Err(r.err(1, format!("header declares {n} assets, so rows need {expected} fields, column line has {}", r.columns)));
        }
        let mut stages: Vec<Vec<Option<Allocation>>> = vec![Vec::new(); horizon];
        for row in r.rows()? {
            if horizon == 0 {
                return Err(row.err("rows in a table of horizon 0"));
            }
            let (t, b) = key_of(&row, &grid, horizon - 1)?;
            let a = weights_of(&row, 2 + grid.n_regimes(), n)?;
            let stage = &mut stages[t];
            if stage.is_empty() {
                stage.resize(grid.len(), None);
            }
            if stage[b].replace(a).is_some() {
                return Err(row.err(format!("duplicate entry for t = {t}, belief {b}")));
            }
        }
        let mut table = LookupTable::new(horizon, grid);
        for (t, stage) in stages.into_iter().enumerate() {
            if stage.is_empty() {
                continue;
            }
            let allocs = stage
                .into_iter()
                .enumerate()
                .map(|(b, a)| a.ok_or(Error::MissingEntry { t, belief: b }))
                .collect::<Result<Vec<_>>>()?;
            table.insert_stage(t, allocs)?;
        }
        Ok(table)
    }
}

impl TableData for PolicyTable {
    const KIND: &'static str = "policy";

    fn header(&self, h: &mut Header) {
        h.set("horizon", self.horizon);
        grid_header(h, &self.grid);
        h.set("assets", self.alloc.first().map_or(0, |s| s[0].n_risky()));
        let unconverged: Vec<String> = self.unconverged.iter().map(|(t, b)| format!("{t}:{b}")).collect();
        h.set("unconverged", unconverged.join(" "));
    }

    fn columns(&self) -> Vec<String> {
        let mut c = vec!["t".to_string(), "belief".to_string()];
        c.extend(belief_columns(&self.grid));
        c.push("value".into());
        c.extend(weight_columns(self.alloc.first().map_or(0, |s| s[0].n_risky())));
        c
    }

    /// Rows for `t = horizon` carry the terminal value and empty weights.
    fn write_rows(&self, out: &mut String) {
        let n = self.alloc.first().map_or(0, |s| s[0].n_risky());
        for (t, values) in self.value.iter().enumerate() {
            for (b, v) in values.iter().enumerate() {
                let _ = write!(out, "{t},{b}");
                push_reals(out, self.grid.point(b).probs());
                push_reals(out, &[*v]);
                match self.alloc.get(t) {
                    Some(stage) => push_reals(out, stage[b].weights()),
                    None => out.push_str(&",".repeat(n + 1)),
                }
                out.push('\n');
            }
        }
    }

    fn read(r: &mut TableReader) -> Result<Self> {
        let horizon: usize = r.field("horizon")?;
        let grid = grid_from(r)?;
        let n: usize = r.field("assets")?;
        let k = grid.n_regimes();
        let expected = 3 + k + n + 1;
        if r.columns != expected {
            return Err(r.err(1, format!("header declares {n} assets, so rows need {expected} fields, column line has {}", r.columns)));
        }
        let mut value = vec![vec![None; grid.len()]; horizon + 1];
        let mut alloc = vec![vec![None; grid.len()]; horizon];
        for row in r.rows()? {
            let (t, b) = key_of(&row, &grid, horizon)?;
            if value[t][b].replace(row.get::<f64>(2 + k)?).is_some() {
                return Err(row.err(format!("duplicate entry for t = {t}, belief {b}")));
            }
            if t < horizon {
                alloc[t][b] = Some(weights_of(&row, 3 + k, n)?);
            }
        }
        let value = value
            .into_iter()
            .enumerate()
            .map(|(t, s)| s.into_iter().enumerate().map(|(b, v)| v.ok_or(Error::MissingEntry { t, belief: b })).collect())
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let alloc = alloc
            .into_iter()
            .enumerate()
            .map(|(t, s)| s.into_iter().enumerate().map(|(b, a)| a.ok_or(Error::MissingEntry { t, belief: b })).collect())
            .collect::<Result<Vec<Vec<Allocation>>>>()?;
        let unconverged = r
            .header
            .get("unconverged")
            .unwrap_or("")
            .split_whitespace()
            .map(|p| {
                let (t, b) = p.split_once(':').ok_or_else(|| r.err(1, format!("bad unconverged entry `{p}`")))?;
                Ok((t.parse().map_err(|_| r.err(1, "bad unconverged t"))?, b.parse().map_err(|_| r.err(1, "bad unconverged belief"))?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PolicyTable { horizon, grid, alloc, value, unconverged })
    }
}

impl TableData for PathPool {
    const KIND: &'static str = "pool";

    fn header(&self, h: &mut Header) {
        h.set("horizon", self.horizon());
        h.set("assets", self.n_risky());
        h.set("paths", self.paths_per_belief());
        h.set("beliefs", self.n_beliefs());
        h.set("rf", self.rf().iter().map(|r| fmt_real(*r)).collect::<Vec<_>>().join(" "));
    }

    fn columns(&self) -> Vec<String> {
        let mut c: Vec<String> = ["belief", "path", "step", "regime", "next_belief"].iter().map(|s| s.to_string()).collect();
        c.extend((0..self.n_risky()).map(|i| format!("r{i}")));
        c
    }

    fn write_rows(&self, out: &mut String) {
        for b in 0..self.n_beliefs() {
            for p in 0..self.paths_per_belief() {
                let v = self.path(b, p);
                for s in 0..v.len() {
                    let _ = write!(out, "{b},{p},{s},{},{}", v.regime(s), v.next_belief(s));
                    push_reals(out, v.returns(s));
                    out.push('\n');
                }
            }
        }
    }

    fn read(r: &mut TableReader) -> Result<Self> {
        let horizon: usize = r.field("horizon")?;
        let n: usize = r.field("assets")?;
        let paths: usize = r.field("paths")?;
        let beliefs: usize = r.field("beliefs")?;
        let rf = r.reals("rf")?;
        if r.columns != 5 + n {
            return Err(r.err(1, format!("header declares {n} assets, so rows need {} fields, column line has {}", 5 + n, r.columns)));
        }
        let rows = r.rows()?;
        if rows.len() != beliefs * paths * horizon {
            return Err(r.err(1, format!("{} rows, header implies {}", rows.len(), beliefs * paths * horizon)));
        }
        let mut pools: Vec<BeliefPool> = (0..beliefs)
            .map(|_| BeliefPool {
                returns: Vec::with_capacity(paths * horizon * n),
                regimes: Vec::with_capacity(paths * horizon),
                next_belief: Vec::with_capacity(paths * horizon),
            })
            .collect();
        for (i, row) in rows.iter().enumerate() {
            let (b, p, s): (usize, usize, usize) = (row.get(0)?, row.get(1)?, row.get(2)?);
            let expect = (i / (paths * horizon), (i / horizon) % paths, i % horizon);
            if (b, p, s) != expect {
                return Err(row.err(format!("expected belief {}, path {}, step {}", expect.0, expect.1, expect.2)));
            }
            let regime: u16 = row.get(3)?;
            if regime as usize >= rf.len() {
                return Err(row.err(format!("regime {regime} has no risk-free rate")));
            }
            let next: u32 = row.get(4)?;
            if next as usize >= beliefs {
                return Err(row.err(format!("next belief {next} outside {beliefs} grid points")));
            }
            let pool = &mut pools[b];
            pool.regimes.push(regime);
            pool.next_belief.push(next);
            pool.returns.extend(row.reals(5..5 + n)?);
        }
        Ok(PathPool::from_parts(horizon, n, paths, rf, pools))
    }
}

impl TableData for NtzParams {
    const KIND: &'static str = "ntz";

    fn header(&self, h: &mut Header) {
        let l = &self.layout;
        h.set("regimes", l.n_regimes);
        h.set("assets", l.n_risky);
        h.set("hidden", l.hidden);
        h.set("wealth_feature", l.wealth_feature);
        h.set("center_head", l.center_head);
    }

    fn columns(&self) -> Vec<String> {
        vec!["block".into(), "index".into(), "value".into()]
    }

    fn write_rows(&self, out: &mut String) {
        for (name, range) in self.layout.blocks() {
            for (i, v) in self.values[range].iter().enumerate() {
                let _ = writeln!(out, "{name},{i},{}", fmt_real(*v));
            }
        }
    }

    fn read(r: &mut TableReader) -> Result<Self> {
        let layout = NtzLayout {
            n_regimes: r.field("regimes")?,
            n_risky: r.field("assets")?,
            hidden: r.field("hidden")?,
            wealth_feature: r.field("wealth_feature")?,
            center_head: r.field("center_head")?,
        };
        let mut params = NtzParams::zeros(layout);
        let mut seen = vec![false; layout.n_params()];
        for row in r.rows()? {
            let name: String = row.get(0)?;
            let i: usize = row.get(1)?;
            let range = layout.block(&name).ok_or_else(|| row.err(format!("unknown block `{name}`")))?;
            if i >= range.len() {
                return Err(row.err(format!("index {i} outside block `{name}` of {}", range.len())));
            }
            let at = range.start + i;
            if std::mem::replace(&mut seen[at], true) {
                return Err(row.err(format!("duplicate {name}[{i}]")));
            }
            params.values[at] = row.get(2)?;
        }
        if let Some(at) = seen.iter().position(|s| !s) {
            let (name, range) = layout.blocks().into_iter().find(|(_, r)| r.contains(&at)).unwrap();
            return Err(r.err(1, format!("missing {name}[{}]", at - range.start)));
        }
        params.validate()?;
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmcts::build_path_pool;
    use crate::market::RegimeModel;
    use proptest::prelude::*;

    fn lookup(n: usize, values: &[f64]) -> LookupTable {
        let grid = BeliefGrid::with_divisions(2, 2);
        let mut t = LookupTable::new(2, grid.clone());
        for s in 0..2 {
            let allocs = (0..grid.len())
                .map(|b| {
                    let w: Vec<f64> = (0..n).map(|i| values[(s * 7 + b * 3 + i) % values.len()] / n as f64).collect();
                    Allocation::from_risky(&w)
                })
                .collect();
            t.insert_stage(s, allocs).unwrap();
        }
        t
    }

    #[test]
    fn lookup_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.table");
        let t = lookup(2, &[0.1, 1.0 / 3.0, 0.7, std::f64::consts::PI / 10.0]);
        save_table(&p, &t, &[("seed", "7".into())]).unwrap();
        let back: LookupTable = load_table(&p).unwrap();
        assert_eq!(back, t);
        assert_eq!(read_header(&p).unwrap().get("seed"), Some("7"));
    }

    #[test]
    fn short_rows_are_rejected_with_their_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.table");
        save_table(&p, &lookup(2, &[0.2, 0.3]), &[]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let last = lines.len() - 1;
        let cut = lines[last].rfind(',').unwrap();
        lines[last].truncate(cut);
        std::fs::write(&p, lines.join("\n")).unwrap();
        match load_table::<LookupTable>(&p) {
            Err(Error::Table { line, reason, .. }) => {
                assert_eq!(line, last + 1);
                assert!(reason.contains(&format!("row {}", last + 1)), "{reason}");
            }
            other => panic!("expected a row error, got {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_names_both_versions() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.table");
        save_table(&p, &lookup(1, &[0.5]), &[]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap().replace("version = 1", "version = 2");
        std::fs::write(&p, text).unwrap();
        let e = load_table::<LookupTable>(&p).unwrap_err();
        assert!(matches!(e, Error::Version { found: 2, expected: 1, .. }));
        let msg = e.to_string();
        assert!(msg.contains('2') && msg.contains('1'));
    }

    #[test]
    fn kinds_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.table");
        save_table(&p, &lookup(1, &[0.5]), &[]).unwrap();
        assert!(matches!(load_table::<NtzParams>(&p), Err(Error::Table { .. })));
    }

    #[test]
    fn policy_and_pool_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = BeliefGrid::with_divisions(2, 2);
        let pt = PolicyTable {
            horizon: 2,
            grid: grid.clone(),
            alloc: vec![vec![Allocation::new(vec![0.25, 0.75]).unwrap(); 3]; 2],
            value: vec![vec![-0.9, -0.95, -1.0 / 3.0]; 3],
            unconverged: vec![(1, 2)],
        };
        let p = dir.path().join("p.table");
        save_table(&p, &pt, &[]).unwrap();
        let back: PolicyTable = load_table(&p).unwrap();
        assert_eq!((back.alloc, back.value, back.unconverged), (pt.alloc, pt.value, pt.unconverged));

        let m = RegimeModel::new(
            vec![vec![0.01, 0.02], vec![-0.01, 0.0]],
            vec![vec![vec![0.01, 0.0], vec![0.0, 0.02]], vec![vec![0.03, 0.01], vec![0.01, 0.02]]],
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            vec![0.0, 0.01],
        )
        .unwrap();
        let pool = build_path_pool(&m, &grid, 4, 3, true, 5);
        let p = dir.path().join("pool.table");
        save_table(&p, &pool, &[]).unwrap();
        assert_eq!(load_table::<PathPool>(&p).unwrap(), pool);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn tables_round_trip(values in proptest::collection::vec(0.0f64..1.0, 1..12), n in 1usize..4, seed in 0u64..1000) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("t.table");
            let t = lookup(n, &values);
            save_table(&p, &t, &[]).unwrap();
            prop_assert_eq!(load_table::<LookupTable>(&p).unwrap(), t);

            let layout = NtzLayout { n_regimes: 2, n_risky: n, hidden: 3, wealth_feature: seed % 2 == 0, center_head: seed % 3 == 0 };
            let params = NtzParams::init(layout, seed);
            save_table(&p, &params, &[]).unwrap();
            prop_assert_eq!(load_table::<NtzParams>(&p).unwrap(), params);
        }
    }
}
