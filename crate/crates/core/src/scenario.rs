//! Network geometry: hexagonal site layout with wrap-around, three-sector
//! sites, and UE drops for ground users and UAVs.
//!
//! Coordinates are meters in a local frame centered on the middle site,
//! `x` pointing east and `y` pointing north. Sites sit on a triangular
//! lattice spanned by `(0, isd)` and `(isd·√3/2, isd/2)`, so every site owns
//! a hexagonal cell whose corners are at compass bearings 30°, 90°, 150°, ...
//! Sector boresights point at three of those corners.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::rng::{self, Rng};

/// Sector boresights, degrees clockwise from north.
pub const SECTOR_BEARINGS_DEG: [f64; 3] = [30.0, 150.0, 270.0];
/// Minimum horizontal distance between a ground UE and its site.
pub const MIN_GUE_SITE_DISTANCE_M: f64 = 35.0;

pub const TILT_BOUNDS_DEG: [f64; 2] = [-20.0, 45.0];
pub const VHPBW_BOUNDS_DEG: [f64; 2] = [5.0, 70.0];
pub const BASELINE_TILT_DEG: f64 = -12.0;
pub const BASELINE_VHPBW_DEG: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorridorSpec {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub height: f64,
}

impl CorridorSpec {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        p[0] >= self.x_range[0]
            && p[0] <= self.x_range[1]
            && p[1] >= self.y_range[0]
            && p[1] <= self.y_range[1]
            && p[2] == self.height
    }

    fn validate(&self) -> Result<()> {
        if !(self.x_range[0] < self.x_range[1] && self.y_range[0] < self.y_range[1]) {
            return config_err(format!("corridor ranges must satisfy min < max: {self:?}"));
        }
        if !(self.height > 0.0) {
            return config_err(format!("corridor height must be positive: {}", self.height));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UavMode {
    Corridors,
    Uniform,
}

fn default_h_hpbw() -> f64 {
    65.0
}

fn default_fixed_vhpbw() -> f64 {
    BASELINE_VHPBW_DEG
}

/// How LoS state and shadowing are drawn across the three sectors of a site.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LargeScaleSharing {
    /// Co-sited sectors see the same LoS state and shadowing toward a UE.
    #[default]
    PerSite,
    /// Every (cell, UE) link is drawn independently.
    PerLink,
}

/// Complete description of a deployment and its radio parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n_rings: u32,
    /// Inter-site distance, meters.
    pub isd: f64,
    pub bs_height: f64,
    /// Carrier frequency, GHz.
    pub carrier_freq: f64,
    /// Hz.
    pub bandwidth: f64,
    /// Per-cell transmit power over the whole band, dBm.
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    pub gue_per_cell: u32,
    pub gue_height: f64,
    pub corridors: Vec<CorridorSpec>,
    pub uavs_per_corridor: u32,
    pub uav_mode: UavMode,
    pub uniform_uav_height: f64,
    pub lambda_tradeoff: f64,
    pub seed: u64,
    /// Horizontal half-power beamwidth shared by every cell.
    #[serde(default = "default_h_hpbw")]
    pub h_hpbw_deg: f64,
    /// Vertical beamwidth used when a decision carries tilts only.
    #[serde(default = "default_fixed_vhpbw")]
    pub fixed_vhpbw_deg: f64,
    #[serde(default)]
    pub large_scale: LargeScaleSharing,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self::standard()
    }
}

impl ScenarioSpec {
    /// 19 sites, ISD 500 m, 10 GUEs per cell, four UAV corridors at 150 m
    /// with 70 UAVs each, 10 MHz at 2 GHz.
    pub fn standard() -> Self {
        let corridor = |x: [f64; 2], y: [f64; 2]| CorridorSpec {
            x_range: x,
            y_range: y,
            height: 150.0,
        };
        Self {
            n_rings: 2,
            isd: 500.0,
            bs_height: 25.0,
            carrier_freq: 2.0,
            bandwidth: 10e6,
            tx_power_dbm: 46.0,
            noise_figure_db: 9.0,
            gue_per_cell: 10,
            gue_height: 1.5,
            corridors: vec![
                corridor([-650.0, -610.0], [-780.0, 780.0]),
                corridor([-780.0, 780.0], [-650.0, -610.0]),
                corridor([-780.0, 780.0], [610.0, 650.0]),
                corridor([610.0, 650.0], [-780.0, 780.0]),
            ],
            uavs_per_corridor: 70,
            uav_mode: UavMode::Corridors,
            uniform_uav_height: 150.0,
            lambda_tradeoff: 0.5,
            seed: 1,
            h_hpbw_deg: default_h_hpbw(),
            fixed_vhpbw_deg: default_fixed_vhpbw(),
            large_scale: LargeScaleSharing::PerSite,
        }
    }

    /// Same population, UAVs spread over the whole layout at a fixed height.
    pub fn uniform_uavs() -> Self {
        Self {
            uav_mode: UavMode::Uniform,
            ..Self::standard()
        }
    }

    /// Ground users only; the UAV population is empty.
    pub fn ground_only() -> Self {
        Self {
            uavs_per_corridor: 0,
            ..Self::standard()
        }
    }

    pub fn with_corridor_height(mut self, height: f64) -> Self {
        for c in &mut self.corridors {
            c.height = height;
        }
        self
    }

    pub fn n_cells(&self) -> usize {
        3 * site_count(self.n_rings)
    }

    pub fn n_uavs(&self) -> usize {
        match self.uav_mode {
            UavMode::Corridors | UavMode::Uniform => self.uavs_per_corridor as usize * self.corridors.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.isd > 0.0) {
            return config_err("isd must be positive");
        }
        if !(self.bandwidth > 0.0) {
            return config_err("bandwidth must be positive");
        }
        if !(0.0..=1.0).contains(&self.lambda_tradeoff) {
            return config_err("lambda_tradeoff must lie in [0, 1]");
        }
        if !(self.bs_height > 0.0 && self.gue_height > 0.0) {
            return config_err("heights must be positive");
        }
        if !(self.h_hpbw_deg > 0.0) {
            return config_err("horizontal beamwidth must be positive");
        }
        if !(VHPBW_BOUNDS_DEG[0]..=VHPBW_BOUNDS_DEG[1]).contains(&self.fixed_vhpbw_deg) {
            return config_err("fixed vertical beamwidth outside [5, 70] degrees");
        }
        if self.uav_mode == UavMode::Corridors && self.corridors.is_empty() && self.uavs_per_corridor > 0 {
            return config_err("corridor mode requires at least one corridor");
        }
        for c in &self.corridors {
            c.validate()?;
        }
        if self.uav_mode == UavMode::Uniform && !(self.uniform_uav_height > 0.0) {
            return config_err("uniform UAV height must be positive");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `1 + 3r(r+1)` sites in a hexagonal cluster of `r` rings.
pub fn site_count(n_rings: u32) -> usize {
    let r = n_rings as usize;
    1 + 3 * r * (r + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UeKind {
    #[serde(rename = "GUE")]
    Gue,
    #[serde(rename = "UAV")]
    Uav,
}

impl UeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            UeKind::Gue => "GUE",
            UeKind::Uav => "UAV",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: usize,
    pub pos: [f64; 2],
    /// Axial lattice coordinates.
    pub axial: [i64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: usize,
    pub site: usize,
    pub bearing_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ue {
    pub id: usize,
    pub pos: [f64; 3],
    pub kind: UeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub isd: f64,
    pub n_rings: u32,
    pub bs_height: f64,
    pub sites: Vec<Site>,
    pub cells: Vec<Cell>,
    pub ues: Vec<Ue>,
    pub wrap_offsets: Vec<[f64; 2]>,
    /// False when the layout has no toroidal replication.
    pub wrapped: bool,
}

impl Deployment {
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_ues(&self) -> usize {
        self.ues.len()
    }

    pub fn kinds(&self) -> Vec<UeKind> {
        self.ues.iter().map(|u| u.kind).collect()
    }

    pub fn count(&self, kind: UeKind) -> usize {
        self.ues.iter().filter(|u| u.kind == kind).count()
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.isd)
    }

    /// True when `p` falls in the hexagonal cell of one of the cluster's sites.
    pub fn in_footprint(&self, p: [f64; 2]) -> bool {
        let (q, r) = self.lattice().nearest(p);
        hex_distance(q, r) <= self.n_rings as i64
    }

    /// Convex hull of the union of site cells, counter-clockwise.
    pub fn hull(&self) -> Vec<[f64; 2]> {
        let circum = self.isd / 3f64.sqrt();
        let mut vertices = Vec::with_capacity(self.sites.len() * 6);
        for s in &self.sites {
            for k in 0..6 {
                let a = (k as f64) * std::f64::consts::FRAC_PI_3;
                vertices.push([s.pos[0] + circum * a.cos(), s.pos[1] + circum * a.sin()]);
            }
        }
        convex_hull(vertices)
    }
}

/// Triangular site lattice with basis `(0, isd)` and `(isd·√3/2, isd/2)`.
#[derive(Debug, Clone, Copy)]
pub struct Lattice {
    isd: f64,
}

impl Lattice {
    pub fn new(isd: f64) -> Self {
        Self { isd }
    }

    pub fn position(&self, q: i64, r: i64) -> [f64; 2] {
        let (q, r) = (q as f64, r as f64);
        [self.isd * r * 3f64.sqrt() / 2.0, self.isd * (q + r / 2.0)]
    }

    fn fractional(&self, p: [f64; 2]) -> (f64, f64) {
        let r = p[0] * 2.0 / (3f64.sqrt() * self.isd);
        let q = p[1] / self.isd - r / 2.0;
        (q, r)
    }

    /// Nearest lattice point, i.e. the site whose hexagonal cell holds `p`.
    pub fn nearest(&self, p: [f64; 2]) -> (i64, i64) {
        let (fq, fr) = self.fractional(p);
        let (q0, r0) = (fq.floor() as i64, fr.floor() as i64);
        let mut best = (q0, r0);
        let mut best_d = f64::INFINITY;
        for dq in 0..=1 {
            for dr in 0..=1 {
                let c = self.position(q0 + dq, r0 + dr);
                let d = (c[0] - p[0]).powi(2) + (c[1] - p[1]).powi(2);
                if d < best_d {
                    best_d = d;
                    best = (q0 + dq, r0 + dr);
                }
            }
        }
        best
    }

    fn snap(&self, p: [f64; 2]) -> (i64, i64) {
        let (q, r) = self.fractional(p);
        (q.round() as i64, r.round() as i64)
    }
}

pub fn hex_distance(q: i64, r: i64) -> i64 {
    (q.abs() + r.abs() + (q + r).abs()) / 2
}

fn cluster_axial(n_rings: u32) -> Vec<[i64; 2]> {
    let n = n_rings as i64;
    let lattice = Lattice::new(1.0);
    let mut pts: Vec<[i64; 2]> = (-n..=n)
        .flat_map(|q| (-n..=n).map(move |r| [q, r]))
        .filter(|&[q, r]| hex_distance(q, r) <= n)
        .collect();
    // Ring by ring, clockwise from north within a ring.
    pts.sort_by(|a, b| {
        let ra = hex_distance(a[0], a[1]);
        let rb = hex_distance(b[0], b[1]);
        let pa = lattice.position(a[0], a[1]);
        let pb = lattice.position(b[0], b[1]);
        let ang = |p: [f64; 2]| p[0].atan2(p[1]).rem_euclid(std::f64::consts::TAU);
        ra.cmp(&rb)
            .then(ang(pa).partial_cmp(&ang(pb)).unwrap_or(std::cmp::Ordering::Equal))
    });
    pts
}

/// Sites and cells of the hexagonal layout (no UEs).
pub fn build_hex_layout(spec: &ScenarioSpec) -> Deployment {
    let lattice = Lattice::new(spec.isd);
    let sites: Vec<Site> = cluster_axial(spec.n_rings)
        .into_iter()
        .enumerate()
        .map(|(id, [q, r])| Site {
            id,
            pos: lattice.position(q, r),
            axial: [q, r],
        })
        .collect();
    let cells = sites
        .iter()
        .flat_map(|s| SECTOR_BEARINGS_DEG.iter().enumerate().map(move |(k, &b)| (s.id, k, b)))
        .map(|(site, k, bearing_deg)| Cell {
            id: 3 * site + k,
            site,
            bearing_deg,
        })
        .collect();
    let (wrap_offsets, wrapped) = wrap_offsets(spec);
    Deployment {
        isd: spec.isd,
        n_rings: spec.n_rings,
        bs_height: spec.bs_height,
        sites,
        cells,
        ues: Vec::new(),
        wrap_offsets,
        wrapped,
    }
}

/// Cluster translations for toroidal wrap-around, zero vector first.
///
/// A cluster of `R` rings tiles the plane under the lattice generated by the
/// axial translation `(R+1, R)` and its rotations by multiples of 60°. A
/// single site has nothing to wrap and returns the zero vector alone.
pub fn wrap_offsets(spec: &ScenarioSpec) -> (Vec<[f64; 2]>, bool) {
    if spec.n_rings == 0 {
        return (vec![[0.0, 0.0]], false);
    }
    let lattice = Lattice::new(spec.isd);
    let n = spec.n_rings as i64;
    let base = lattice.position(n + 1, n);
    let mut out = vec![[0.0, 0.0]];
    for k in 0..6 {
        let a = (k as f64) * std::f64::consts::FRAC_PI_3;
        let rotated = [
            base[0] * a.cos() - base[1] * a.sin(),
            base[0] * a.sin() + base[1] * a.cos(),
        ];
        let (q, r) = lattice.snap(rotated);
        out.push(lattice.position(q, r));
    }
    (out, true)
}

fn corridor_in_hull(c: &CorridorSpec, hull: &[[f64; 2]]) -> bool {
    let corners = [
        [c.x_range[0], c.y_range[0]],
        [c.x_range[1], c.y_range[0]],
        [c.x_range[1], c.y_range[1]],
        [c.x_range[0], c.y_range[1]],
    ];
    corners.iter().all(|&p| point_in_convex(hull, p))
}

/// Fill the layout with GUEs and UAVs. Deterministic in `rng`.
pub fn drop_ues(spec: &ScenarioSpec, deployment: &Deployment, rng: &mut Rng) -> Result<Deployment> {
    spec.validate()?;
    let mut out = deployment.clone();
    let hull = deployment.hull();
    if spec.uav_mode == UavMode::Corridors && spec.uavs_per_corridor > 0 {
        for c in &spec.corridors {
            if !corridor_in_hull(c, &hull) {
                return config_err(format!("corridor {c:?} extends outside the layout footprint"));
            }
        }
    }
    let lattice = deployment.lattice();
    let reach = spec.isd * spec.n_rings as f64 + spec.isd / 3f64.sqrt();
    let sample_footprint = |rng: &mut Rng, min_site_dist: f64| -> [f64; 2] {
        loop {
            let p = [rng.random_range(-reach..reach), rng.random_range(-reach..reach)];
            let (q, r) = lattice.nearest(p);
            if hex_distance(q, r) > spec.n_rings as i64 {
                continue;
            }
            let s = lattice.position(q, r);
            if ((p[0] - s[0]).powi(2) + (p[1] - s[1]).powi(2)).sqrt() >= min_site_dist {
                return p;
            }
        }
    };

    let mut ues = Vec::with_capacity(spec.gue_per_cell as usize * out.n_cells() + spec.n_uavs());
    for _ in 0..spec.gue_per_cell as usize * out.n_cells() {
        let p = sample_footprint(rng, MIN_GUE_SITE_DISTANCE_M);
        ues.push(Ue {
            id: ues.len(),
            pos: [p[0], p[1], spec.gue_height],
            kind: UeKind::Gue,
        });
    }
    match spec.uav_mode {
        UavMode::Corridors => {
            for c in &spec.corridors {
                for _ in 0..spec.uavs_per_corridor {
                    let x = rng.random_range(c.x_range[0]..=c.x_range[1]);
                    let y = rng.random_range(c.y_range[0]..=c.y_range[1]);
                    ues.push(Ue {
                        id: ues.len(),
                        pos: [x, y, c.height],
                        kind: UeKind::Uav,
                    });
                }
            }
        }
        UavMode::Uniform => {
            for _ in 0..spec.n_uavs() {
                let p = sample_footprint(rng, 0.0);
                ues.push(Ue {
                    id: ues.len(),
                    pos: [p[0], p[1], spec.uniform_uav_height],
                    kind: UeKind::Uav,
                });
            }
        }
    }
    out.ues = ues;
    Ok(out)
}

/// Layout plus UE drop from the scenario's own seed.
pub fn build_deployment(spec: &ScenarioSpec) -> Result<Deployment> {
    let layout = build_hex_layout(spec);
    drop_ues(spec, &layout, &mut rng::stream(spec.seed, rng::STREAM_UE_DROP))
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup_by(|a, b| (a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 1e-9 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 1e-9 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn point_in_convex(hull: &[[f64; 2]], p: [f64; 2]) -> bool {
    (0..hull.len()).all(|i| cross(hull[i], hull[(i + 1) % hull.len()], p) >= -1e-9)
}

/// Per-cell antenna settings under optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionVector {
    pub tilts_deg: Vec<f64>,
    /// Present only when beamwidths are optimized jointly with tilts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vhpbw_deg: Option<Vec<f64>>,
}

impl DecisionVector {
    pub fn tilt_only(tilts_deg: Vec<f64>) -> Self {
        Self {
            tilts_deg,
            vhpbw_deg: None,
        }
    }

    pub fn joint(tilts_deg: Vec<f64>, vhpbw_deg: Vec<f64>) -> Self {
        Self {
            tilts_deg,
            vhpbw_deg: Some(vhpbw_deg),
        }
    }

    /// All cells down-tilted to −12°; beamwidths at 10° in joint mode.
    pub fn baseline_3gpp(n_cells: usize, joint: bool) -> Self {
        Self {
            tilts_deg: vec![BASELINE_TILT_DEG; n_cells],
            vhpbw_deg: joint.then(|| vec![BASELINE_VHPBW_DEG; n_cells]),
        }
    }

    pub fn n_cells(&self) -> usize {
        self.tilts_deg.len()
    }

    pub fn is_joint(&self) -> bool {
        self.vhpbw_deg.is_some()
    }

    pub fn dim(&self) -> usize {
        if self.is_joint() {
            2 * self.n_cells()
        } else {
            self.n_cells()
        }
    }

    pub fn vhpbw(&self, cell: usize, fixed: f64) -> f64 {
        self.vhpbw_deg.as_ref().map_or(fixed, |v| v[cell])
    }

    /// Flat `[tilts..., vhpbw...]` layout used by the optimizers.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut x = self.tilts_deg.clone();
        if let Some(v) = &self.vhpbw_deg {
            x.extend_from_slice(v);
        }
        x
    }

    pub fn from_vec(x: &[f64], n_cells: usize, joint: bool) -> Result<Self> {
        let expected = if joint { 2 * n_cells } else { n_cells };
        if x.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: x.len() });
        }
        Ok(Self {
            tilts_deg: x[..n_cells].to_vec(),
            vhpbw_deg: joint.then(|| x[n_cells..].to_vec()),
        })
    }

    pub fn bounds(n_cells: usize, joint: bool) -> Vec<[f64; 2]> {
        let mut b = vec![TILT_BOUNDS_DEG; n_cells];
        if joint {
            b.extend(std::iter::repeat_n(VHPBW_BOUNDS_DEG, n_cells));
        }
        b
    }

    pub fn validate(&self, n_cells: usize) -> Result<()> {
        if self.tilts_deg.len() != n_cells {
            return Err(Error::DimensionMismatch {
                expected: n_cells,
                got: self.tilts_deg.len(),
            });
        }
        let in_range = |v: f64, b: [f64; 2]| v >= b[0] - 1e-9 && v <= b[1] + 1e-9;
        if let Some(t) = self.tilts_deg.iter().find(|&&t| !in_range(t, TILT_BOUNDS_DEG)) {
            return config_err(format!("tilt {t} outside [-20, 45] degrees"));
        }
        if let Some(v) = &self.vhpbw_deg {
            if v.len() != n_cells {
                return Err(Error::DimensionMismatch {
                    expected: n_cells,
                    got: v.len(),
                });
            }
            if let Some(w) = v.iter().find(|&&w| !in_range(w, VHPBW_BOUNDS_DEG)) {
                return config_err(format!("vertical beamwidth {w} outside [5, 70] degrees"));
            }
        }
        Ok(())
    }

    /// Cells whose boresight points above the horizon.
    pub fn uptilted_cells(&self) -> Vec<usize> {
        (0..self.n_cells()).filter(|&c| self.tilts_deg[c] > 0.0).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_rings(n: u32) -> ScenarioSpec {
        ScenarioSpec {
            n_rings: n,
            ..ScenarioSpec::standard()
        }
    }

    #[test]
    fn site_and_cell_counts() {
        for (rings, sites) in [(0, 1), (1, 7), (2, 19), (3, 37)] {
            let d = build_hex_layout(&spec_rings(rings));
            assert_eq!(d.sites.len(), sites);
            assert_eq!(d.cells.len(), 3 * sites);
            assert_eq!(site_count(rings), sites);
        }
    }

    #[test]
    fn three_cells_per_site_120_apart() {
        let d = build_hex_layout(&ScenarioSpec::standard());
        for s in &d.sites {
            let b: Vec<f64> = d
                .cells
                .iter()
                .filter(|c| c.site == s.id)
                .map(|c| c.bearing_deg)
                .collect();
            assert_eq!(b, vec![30.0, 150.0, 270.0]);
        }
        assert_eq!(d.sites[0].pos, [0.0, 0.0]);
    }

    #[test]
    fn wrap_offsets_19_sites_tile_the_plane() {
        let spec = ScenarioSpec::standard();
        let d = build_hex_layout(&spec);
        assert!(d.wrapped);
        assert_eq!(d.wrap_offsets.len(), 7);
        assert!(d.wrap_offsets.contains(&[0.0, 0.0]));
        // closed under negation
        for o in &d.wrap_offsets {
            assert!(d
                .wrap_offsets
                .iter()
                .any(|p| (p[0] + o[0]).abs() < 1e-6 && (p[1] + o[1]).abs() < 1e-6));
        }
        // translated clusters are disjoint and cover the ring just outside the cluster
        let lattice = d.lattice();
        let mut covered = Vec::new();
        for o in &d.wrap_offsets {
            for s in &d.sites {
                let p = [s.pos[0] + o[0], s.pos[1] + o[1]];
                covered.push(lattice.nearest(p));
            }
        }
        let mut uniq = covered.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 7 * 19, "copies overlap");
        for q in -3i64..=3 {
            for r in -3i64..=3 {
                if hex_distance(q, r) <= 3 {
                    assert!(covered.contains(&(q, r)), "({q},{r}) uncovered");
                }
            }
        }
    }

    #[test]
    fn single_site_has_no_wrap() {
        let d = build_hex_layout(&spec_rings(0));
        assert_eq!(d.wrap_offsets, vec![[0.0, 0.0]]);
        assert!(!d.wrapped);
    }

    #[test]
    fn nearest_lattice_point_matches_brute_force() {
        use rand::SeedableRng;
        let lattice = Lattice::new(500.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let p = [rng.random_range(-2000.0..2000.0), rng.random_range(-2000.0..2000.0)];
            let mut best = (0, 0);
            let mut best_d = f64::INFINITY;
            for q in -8..=8 {
                for r in -8..=8 {
                    let c = lattice.position(q, r);
                    let d = (c[0] - p[0]).powi(2) + (c[1] - p[1]).powi(2);
                    if d < best_d {
                        best_d = d;
                        best = (q, r);
                    }
                }
            }
            assert_eq!(lattice.nearest(p), best);
        }
    }

    #[test]
    fn default_drop_counts() {
        let spec = ScenarioSpec::standard();
        let d = build_deployment(&spec).unwrap();
        assert_eq!(d.count(UeKind::Gue), 570);
        assert_eq!(d.count(UeKind::Uav), 280);
        for u in &d.ues {
            match u.kind {
                UeKind::Gue => {
                    assert!(d.in_footprint([u.pos[0], u.pos[1]]));
                    assert_eq!(u.pos[2], 1.5);
                }
                UeKind::Uav => assert!(spec.corridors.iter().any(|c| c.contains(u.pos))),
            }
        }
    }

    #[test]
    fn drop_is_deterministic() {
        let spec = ScenarioSpec::standard();
        assert_eq!(build_deployment(&spec).unwrap(), build_deployment(&spec).unwrap());
        let other = ScenarioSpec {
            seed: 2,
            ..spec.clone()
        };
        assert_ne!(
            build_deployment(&spec).unwrap().ues,
            build_deployment(&other).unwrap().ues
        );
    }

    #[test]
    fn gue_only_scenario() {
        let spec = ScenarioSpec {
            uavs_per_corridor: 0,
            ..ScenarioSpec::standard()
        };
        let d = build_deployment(&spec).unwrap();
        assert_eq!(d.count(UeKind::Uav), 0);
        assert_eq!(d.count(UeKind::Gue), 570);
    }

    #[test]
    fn uniform_uavs_at_fixed_height() {
        let d = build_deployment(&ScenarioSpec::uniform_uavs()).unwrap();
        let uavs: Vec<&Ue> = d.ues.iter().filter(|u| u.kind == UeKind::Uav).collect();
        assert_eq!(uavs.len(), 280);
        assert!(uavs
            .iter()
            .all(|u| u.pos[2] == 150.0 && d.in_footprint([u.pos[0], u.pos[1]])));
    }

    #[test]
    fn corridor_outside_footprint_rejected() {
        let mut spec = ScenarioSpec::standard();
        spec.corridors[0].x_range = [-3000.0, -2900.0];
        let err = build_deployment(&spec).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad = [
            ScenarioSpec {
                isd: 0.0,
                ..ScenarioSpec::standard()
            },
            ScenarioSpec {
                bandwidth: -1.0,
                ..ScenarioSpec::standard()
            },
            ScenarioSpec {
                lambda_tradeoff: 1.5,
                ..ScenarioSpec::standard()
            },
            ScenarioSpec {
                corridors: vec![],
                ..ScenarioSpec::standard()
            },
        ];
        for s in bad {
            assert!(s.validate().is_err());
        }
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = ScenarioSpec::standard();
        let back = ScenarioSpec::from_json(&spec.to_json().unwrap()).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn decision_vector_layout() {
        let d = DecisionVector::baseline_3gpp(57, true);
        assert_eq!(d.dim(), 114);
        let x = d.to_vec();
        assert_eq!(DecisionVector::from_vec(&x, 57, true).unwrap(), d);
        assert!(DecisionVector::from_vec(&x, 57, false).is_err());
        assert!(d.validate(57).is_ok());
        let bad = DecisionVector::tilt_only(vec![50.0; 57]);
        assert!(bad.validate(57).is_err());
        assert_eq!(
            DecisionVector::bounds(2, true),
            vec![[-20.0, 45.0], [-20.0, 45.0], [5.0, 70.0], [5.0, 70.0]]
        );
    }
}
