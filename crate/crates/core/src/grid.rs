//! Network data: buses, lines, generator placement and the PTDF matrix.
//!
//! Bus, line and generator indices are 0-based everywhere. A line carries
//! positive flow when power moves from its `from` bus to its `to` bus.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::GridError;

pub const GRID_FORMAT_VERSION: u32 = 1;

/// Static network model.
///
/// `ptdf[l][b]` is the flow on line `l` caused by one MW injected at bus `b`
/// and withdrawn at the reference bus, so the reference column is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub name: String,
    pub n_buses: usize,
    pub reference_bus: usize,
    pub line_from: Vec<usize>,
    pub line_to: Vec<usize>,
    /// Series reactances in p.u.; absent when the file supplies `ptdf` only.
    pub line_reactance: Option<Vec<f64>>,
    pub line_limit: Vec<f64>,
    pub gen_bus: Vec<usize>,
    pub gen_max: Vec<f64>,
    pub gen_min: Vec<f64>,
    /// Nominal per-bus net load, MW. Scenario generators scale this.
    pub base_load: Vec<f64>,
    pub ptdf: Vec<Vec<f64>>,
}

/// On-disk layout of a grid document.
#[derive(Debug, Serialize, Deserialize)]
struct GridFile {
    format_version: u32,
    #[serde(default)]
    name: String,
    n_buses: usize,
    n_lines: usize,
    n_gens: usize,
    #[serde(default)]
    reference_bus: usize,
    line_from: Vec<usize>,
    line_to: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    line_reactance: Option<Vec<f64>>,
    line_limit: Vec<f64>,
    gen_bus: Vec<usize>,
    gen_max: Vec<f64>,
    gen_min: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base_load: Option<Vec<f64>>,
    /// Row-major `n_lines × n_buses`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ptdf: Option<Vec<f64>>,
}

const REQUIRED_FIELDS: [&str; 10] = [
    "format_version",
    "n_buses",
    "n_lines",
    "n_gens",
    "line_from",
    "line_to",
    "line_limit",
    "gen_bus",
    "gen_max",
    "gen_min",
];

impl Grid {
    /// Builds a grid from line reactances, computing the PTDF.
    #[allow(clippy::too_many_arguments)]
    pub fn from_reactances(
        name: &str,
        n_buses: usize,
        reference_bus: usize,
        lines: &[(usize, usize, f64, f64)],
        gen_bus: Vec<usize>,
        gen_max: Vec<f64>,
        gen_min: Vec<f64>,
        base_load: Vec<f64>,
    ) -> Result<Grid, GridError> {
        let line_from: Vec<usize> = lines.iter().map(|l| l.0).collect();
        let line_to: Vec<usize> = lines.iter().map(|l| l.1).collect();
        let reactance: Vec<f64> = lines.iter().map(|l| l.2).collect();
        let line_limit: Vec<f64> = lines.iter().map(|l| l.3).collect();
        let ptdf = compute_ptdf(n_buses, &line_from, &line_to, &reactance, reference_bus)?;
        let grid = Grid {
            name: name.to_string(),
            n_buses,
            reference_bus,
            line_from,
            line_to,
            line_reactance: Some(reactance),
            line_limit,
            gen_bus,
            gen_max,
            gen_min,
            base_load,
            ptdf,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn n_lines(&self) -> usize {
        self.line_from.len()
    }

    pub fn n_gens(&self) -> usize {
        self.gen_bus.len()
    }

    pub fn total_capacity(&self) -> f64 {
        self.gen_max.iter().sum()
    }

    /// Dense `n_buses × n_gens` generator-to-bus incidence matrix.
    pub fn incidence(&self) -> Vec<Vec<f64>> {
        let mut s = vec![vec![0.0; self.n_gens()]; self.n_buses];
        for (k, &b) in self.gen_bus.iter().enumerate() {
            s[b][k] = 1.0;
        }
        s
    }

    /// Net bus injection `S x − e`.
    pub fn net_injection(&self, x: &[f64], load: &[f64]) -> Vec<f64> {
        let mut inj: Vec<f64> = load.iter().map(|e| -e).collect();
        for (k, &b) in self.gen_bus.iter().enumerate() {
            inj[b] += x[k];
        }
        inj
    }

    /// Line flows `Φ · injection`.
    pub fn line_flows(&self, injection: &[f64]) -> Vec<f64> {
        self.ptdf
            .iter()
            .map(|row| row.iter().zip(injection).map(|(p, q)| p * q).sum())
            .collect()
    }

    /// The same network with a different reference bus (PTDF recomputed).
    pub fn with_reference(&self, reference_bus: usize) -> Result<Grid, GridError> {
        let reactance = self.line_reactance.as_ref().ok_or(GridError::Invalid {
            field: "line_reactance",
            reason: "needed to recompute the PTDF for a new reference bus".into(),
        })?;
        let mut g = self.clone();
        g.reference_bus = reference_bus;
        g.ptdf = compute_ptdf(
            self.n_buses,
            &self.line_from,
            &self.line_to,
            reactance,
            reference_bus,
        )?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let m = self.n_buses;
        let l = self.n_lines();
        let n = self.n_gens();
        if m == 0 {
            return Err(GridError::Invalid {
                field: "n_buses",
                reason: "must be positive".into(),
            });
        }
        check_len("line_to", self.line_to.len(), l)?;
        check_len("line_limit", self.line_limit.len(), l)?;
        if let Some(x) = &self.line_reactance {
            check_len("line_reactance", x.len(), l)?;
            if let Some(v) = x.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(invalid("line_reactance", format!("{v} is not positive")));
            }
        }
        check_len("gen_max", self.gen_max.len(), n)?;
        check_len("gen_min", self.gen_min.len(), n)?;
        check_len("base_load", self.base_load.len(), m)?;
        check_len("ptdf", self.ptdf.len(), l)?;
        for row in &self.ptdf {
            check_len("ptdf", row.len(), m)?;
        }
        if self.reference_bus >= m {
            return Err(invalid("reference_bus", format!("{} ≥ n_buses", self.reference_bus)));
        }
        for (field, idx) in [
            ("line_from", &self.line_from),
            ("line_to", &self.line_to),
            ("gen_bus", &self.gen_bus),
        ] {
            if let Some(b) = idx.iter().find(|&&b| b >= m) {
                return Err(invalid(field, format!("bus {b} out of range")));
            }
        }
        if let Some(f) = self.line_limit.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
            return Err(invalid("line_limit", format!("{f} is not positive")));
        }
        for k in 0..n {
            let (lo, hi) = (self.gen_min[k], self.gen_max[k]);
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                return Err(invalid("gen_min", format!("generator {k}: [{lo}, {hi}]")));
            }
        }
        if self.ptdf.iter().any(|row| row[self.reference_bus] != 0.0) {
            return Err(invalid("ptdf", "reference-bus column must be zero".into()));
        }
        if self.base_load.iter().any(|e| !e.is_finite()) {
            return Err(invalid("base_load", "non-finite entry".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON rendering, hex encoded.
    pub fn content_hash(&self) -> String {
        let text = serde_json::to_string(&self.to_file()).expect("grid serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    fn to_file(&self) -> GridFile {
        GridFile {
            format_version: GRID_FORMAT_VERSION,
            name: self.name.clone(),
            n_buses: self.n_buses,
            n_lines: self.n_lines(),
            n_gens: self.n_gens(),
            reference_bus: self.reference_bus,
            line_from: self.line_from.clone(),
            line_to: self.line_to.clone(),
            line_reactance: self.line_reactance.clone(),
            line_limit: self.line_limit.clone(),
            gen_bus: self.gen_bus.clone(),
            gen_max: self.gen_max.clone(),
            gen_min: self.gen_min.clone(),
            base_load: Some(self.base_load.clone()),
            ptdf: Some(self.ptdf.iter().flatten().copied().collect()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("grid serializes")
    }

    pub fn from_json(text: &str) -> Result<Grid, GridError> {
        let value: Value = serde_json::from_str(text)?;
        let obj = value.as_object().ok_or(GridError::Invalid {
            field: "<root>",
            reason: "expected a JSON object".into(),
        })?;
        for field in REQUIRED_FIELDS {
            if !obj.contains_key(field) {
                return Err(GridError::MissingField(field));
            }
        }
        let file: GridFile = serde_json::from_value(value)?;
        if file.format_version != GRID_FORMAT_VERSION {
            return Err(invalid(
                "format_version",
                format!("unsupported version {}", file.format_version),
            ));
        }
        check_len("line_from", file.line_from.len(), file.n_lines)?;
        check_len("gen_bus", file.gen_bus.len(), file.n_gens)?;
        let ptdf = match (&file.ptdf, &file.line_reactance) {
            (Some(flat), _) => {
                check_len("ptdf", flat.len(), file.n_lines * file.n_buses)?;
                if file.n_buses == 0 {
                    vec![Vec::new(); file.n_lines]
                } else {
                    flat.chunks(file.n_buses).map(|c| c.to_vec()).collect()
                }
            }
            (None, Some(x)) => {
                check_len("line_reactance", x.len(), file.n_lines)?;
                compute_ptdf(
                    file.n_buses,
                    &file.line_from,
                    &file.line_to,
                    x,
                    file.reference_bus,
                )?
            }
            (None, None) => return Err(GridError::MissingField("line_reactance")),
        };
        let grid = Grid {
            name: file.name,
            n_buses: file.n_buses,
            reference_bus: file.reference_bus,
            line_from: file.line_from,
            line_to: file.line_to,
            line_reactance: file.line_reactance,
            line_limit: file.line_limit,
            gen_bus: file.gen_bus,
            gen_max: file.gen_max,
            gen_min: file.gen_min,
            base_load: file.base_load.unwrap_or_else(|| vec![0.0; file.n_buses]),
            ptdf,
        };
        grid.validate()?;
        Ok(grid)
    }
}

fn check_len(field: &'static str, got: usize, expected: usize) -> Result<(), GridError> {
    if got != expected {
        return Err(GridError::Dimension {
            field,
            expected,
            got,
        });
    }
    Ok(())
}

fn invalid(field: &'static str, reason: String) -> GridError {
    GridError::Invalid { field, reason }
}

pub fn load_grid(path: &Path) -> Result<Grid, GridError> {
    let text = fs::read_to_string(path).map_err(|source| GridError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Grid::from_json(&text)
}

pub fn save_grid(grid: &Grid, path: &Path) -> Result<(), GridError> {
    fs::write(path, grid.to_json() + "\n").map_err(|source| GridError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// DC power-flow PTDF for the given topology.
///
/// Solves the reduced nodal susceptance system with the reference bus
/// removed; row `l` is `(X[from] − X[to]) / x_l` where `X` is the inverse
/// reduced susceptance matrix padded with a zero row and column at the
/// reference bus.
pub fn compute_ptdf(
    n_buses: usize,
    from: &[usize],
    to: &[usize],
    reactance: &[f64],
    reference_bus: usize,
) -> Result<Vec<Vec<f64>>, GridError> {
    let l = from.len();
    check_len("line_to", to.len(), l)?;
    check_len("line_reactance", reactance.len(), l)?;
    if reference_bus >= n_buses {
        return Err(invalid("reference_bus", format!("{reference_bus} ≥ n_buses")));
    }
    for (&f, &t) in from.iter().zip(to) {
        if f >= n_buses || t >= n_buses || f == t {
            return Err(invalid("line_from", format!("bad line {f} → {t}")));
        }
    }
    if let Some(x) = reactance.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(invalid("line_reactance", format!("{x} is not positive")));
    }

    // connectivity from the reference bus
    let mut adj = vec![Vec::new(); n_buses];
    for (&f, &t) in from.iter().zip(to) {
        adj[f].push(t);
        adj[t].push(f);
    }
    let mut seen = vec![false; n_buses];
    seen[reference_bus] = true;
    let mut queue = VecDeque::from([reference_bus]);
    while let Some(b) = queue.pop_front() {
        for &c in &adj[b] {
            if !seen[c] {
                seen[c] = true;
                queue.push_back(c);
            }
        }
    }
    if let Some(b) = seen.iter().position(|s| !s) {
        return Err(GridError::Disconnected(b));
    }

    // reduced index of each non-reference bus
    let red: Vec<Option<usize>> = (0..n_buses)
        .scan(0usize, |next, b| {
            Some(if b == reference_bus {
                None
            } else {
                *next += 1;
                Some(*next - 1)
            })
        })
        .collect();
    let r = n_buses - 1;
    let mut b_red = DMatrix::<f64>::zeros(r, r);
    for ((&f, &t), &x) in from.iter().zip(to).zip(reactance) {
        let y = 1.0 / x;
        if let Some(i) = red[f] {
            b_red[(i, i)] += y;
        }
        if let Some(j) = red[t] {
            b_red[(j, j)] += y;
        }
        if let (Some(i), Some(j)) = (red[f], red[t]) {
            b_red[(i, j)] -= y;
            b_red[(j, i)] -= y;
        }
    }
    let x_red = if r == 0 {
        DMatrix::zeros(0, 0)
    } else {
        b_red.lu().try_inverse().ok_or(GridError::Singular)?
    };
    let xval = |a: usize, b: usize| match (red[a], red[b]) {
        (Some(i), Some(j)) => x_red[(i, j)],
        _ => 0.0,
    };
    let mut ptdf = vec![vec![0.0; n_buses]; l];
    for li in 0..l {
        let (f, t, x) = (from[li], to[li], reactance[li]);
        for b in 0..n_buses {
            if b != reference_bus {
                ptdf[li][b] = (xval(f, b) - xval(t, b)) / x;
            }
        }
    }
    Ok(ptdf)
}

/// Standard IEEE 14-bus branch reactances (from, to, x) with 0-based buses.
const IEEE14_BRANCHES: [(usize, usize, f64); 20] = [
    (0, 1, 0.05917),
    (0, 4, 0.22304),
    (1, 2, 0.19797),
    (1, 3, 0.17632),
    (1, 4, 0.17388),
    (2, 3, 0.17103),
    (3, 4, 0.04211),
    (3, 6, 0.20912),
    (3, 8, 0.55618),
    (4, 5, 0.25202),
    (5, 10, 0.19890),
    (5, 11, 0.25581),
    (5, 12, 0.13027),
    (6, 7, 0.17615),
    (6, 8, 0.11001),
    (8, 9, 0.08450),
    (8, 13, 0.27038),
    (9, 10, 0.19207),
    (11, 12, 0.19988),
    (12, 13, 0.34802),
];

/// Thermal limits (MW) chosen so that a few corridors congest at high load.
const IEEE14_LIMITS: [f64; 20] = [
    80.0, 100.0, 50.0, 100.0, 100.0, 60.0, 100.0, 100.0, 100.0, 100.0, 100.0, 100.0,
    100.0, 100.0, 100.0, 100.0, 100.0, 100.0, 100.0, 100.0,
];

/// Standard IEEE 14-bus active demand per bus, MW (259 MW total).
const IEEE14_LOAD: [f64; 14] = [
    0.0, 21.7, 94.2, 47.8, 7.6, 11.2, 0.0, 0.0, 29.5, 9.0, 3.5, 6.1, 13.5, 14.9,
];

/// The IEEE 14-bus network with five 0–100 MW generators at buses 1, 2, 3, 6
/// and 8 (1-based numbering), matching the usual generator and synchronous
/// condenser sites of the standard case. Reference bus is bus 1 (index 0).
pub fn ieee14() -> Grid {
    let lines: Vec<(usize, usize, f64, f64)> = IEEE14_BRANCHES
        .iter()
        .zip(IEEE14_LIMITS)
        .map(|(&(f, t, x), lim)| (f, t, x, lim))
        .collect();
    Grid::from_reactances(
        "ieee14",
        14,
        0,
        &lines,
        vec![0, 1, 2, 5, 7],
        vec![100.0; 5],
        vec![0.0; 5],
        IEEE14_LOAD.to_vec(),
    )
    .expect("built-in 14-bus case is valid")
}

/// Parameters of a random meshed test network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticGridSpec {
    pub n_buses: usize,
    pub n_gens: usize,
    /// Extra random lines on top of the spanning ring.
    pub n_chords: usize,
    pub seed: u64,
}

impl Default for SyntheticGridSpec {
    fn default() -> Self {
        SyntheticGridSpec {
            n_buses: 100,
            n_gens: 14,
            n_chords: 40,
            seed: 11,
        }
    }
}

/// A ring of buses with random chords, random generator sites and loads.
///
/// Generator capacities are 60–200 MW with minimum output 20–40% of capacity.
/// Base loads sum to 55% of installed capacity. Line limits are set from the
/// flows of a capacity-proportional dispatch at base load: 1.4× that flow,
/// but never below 40 MW, so only a few lines can congest.
pub fn synthetic_grid(spec: &SyntheticGridSpec) -> Result<Grid, GridError> {
    let m = spec.n_buses;
    if m < 3 || spec.n_gens == 0 || spec.n_gens > m {
        return Err(invalid(
            "n_buses",
            format!("need ≥ 3 buses and 1..=n_buses generators, got {m}/{}", spec.n_gens),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pairs: Vec<(usize, usize)> = (0..m).map(|b| (b, (b + 1) % m)).collect();
    while pairs.len() < m + spec.n_chords {
        let a = rng.gen_range(0..m);
        let b = rng.gen_range(0..m);
        let dup = pairs
            .iter()
            .any(|&(f, t)| (f, t) == (a, b) || (f, t) == (b, a));
        if a != b && !dup {
            pairs.push((a, b));
        }
    }
    let reactance: Vec<f64> = pairs.iter().map(|_| rng.gen_range(0.05..0.3)).collect();

    let mut sites: Vec<usize> = (0..m).collect();
    for i in 0..spec.n_gens {
        let j = rng.gen_range(i..m);
        sites.swap(i, j);
    }
    let mut gen_bus = sites[..spec.n_gens].to_vec();
    gen_bus.sort_unstable();
    let gen_max: Vec<f64> = gen_bus
        .iter()
        .map(|_| (rng.gen_range(60.0..200.0_f64)).round())
        .collect();
    let gen_min: Vec<f64> = gen_max
        .iter()
        .map(|&c| (c * rng.gen_range(0.2..0.4_f64)).round())
        .collect();
    let capacity: f64 = gen_max.iter().sum();
    let weights: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..1.8)).collect();
    let wsum: f64 = weights.iter().sum();
    let base_load: Vec<f64> = weights.iter().map(|w| 0.55 * capacity * w / wsum).collect();

    let from: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let to: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let ptdf = compute_ptdf(m, &from, &to, &reactance, 0)?;
    let total_load: f64 = base_load.iter().sum();
    let mut inj: Vec<f64> = base_load.iter().map(|e| -e).collect();
    for (k, &b) in gen_bus.iter().enumerate() {
        inj[b] += total_load * gen_max[k] / capacity;
    }
    let limits: Vec<f64> = ptdf
        .iter()
        .map(|row| {
            let f: f64 = row.iter().zip(&inj).map(|(p, q)| p * q).sum();
            (1.4 * f.abs()).max(40.0).round()
        })
        .collect();

    let lines: Vec<(usize, usize, f64, f64)> = (0..pairs.len())
        .map(|i| (from[i], to[i], reactance[i], limits[i]))
        .collect();
    Grid::from_reactances(
        &format!("synthetic-{m}"),
        m,
        0,
        &lines,
        gen_bus,
        gen_max,
        gen_min,
        base_load,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_bus_ptdf() {
        let ptdf = compute_ptdf(2, &[0], &[1], &[0.1], 0).unwrap();
        assert_eq!(ptdf.len(), 1);
        assert_eq!(ptdf[0][0], 0.0);
        assert!((ptdf[0][1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn disconnected_network_is_rejected() {
        let err = compute_ptdf(4, &[0, 2], &[1, 3], &[0.1, 0.1], 0).unwrap_err();
        assert!(matches!(err, GridError::Disconnected(2)));
    }

    #[test]
    fn ieee14_is_valid() {
        let g = ieee14();
        assert_eq!((g.n_buses, g.n_lines(), g.n_gens()), (14, 20, 5));
        assert!((g.base_load.iter().sum::<f64>() - 259.0).abs() < 1e-9);
        for row in g.incidence().iter() {
            assert!(row.iter().sum::<f64>() <= 1.0);
        }
    }

    #[test]
    fn synthetic_grid_is_connected_and_sized() {
        let g = synthetic_grid(&SyntheticGridSpec::default()).unwrap();
        assert_eq!(g.n_buses, 100);
        assert_eq!(g.n_gens(), 14);
        assert_eq!(g.n_lines(), 140);
    }
}
