//! Large-scale link gains between every cell and every UE.

use std::io::Write;

use super::antenna::{combine_attenuation, max_gain, plane_attenuation, wrap_deg};
use super::pathloss::{los_draw, path_loss, shadow_fading, shadow_sigma_db, LinkGeometry};
use crate::error::Result;
use crate::rng::Rng;
use crate::scenario::{DecisionVector, Deployment, LargeScaleSharing, ScenarioSpec, UeKind};

/// Decision-independent part of every link: the chosen wrap copy, its
/// propagation state and the horizontal antenna attenuation.
///
/// Only the vertical pattern and the peak gain change with tilts and
/// beamwidths, so optimizers build this once per experiment and then call
/// [`LinkBudget::gain_table`] per evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    pub n_cells: usize,
    pub n_ues: usize,
    pub h_hpbw_deg: f64,
    pub fixed_vhpbw_deg: f64,
    pub kinds: Vec<UeKind>,
    /// UE-major `[ue * n_cells + cell]`, like every matrix below.
    pub pl_db: Vec<f64>,
    pub sf_db: Vec<f64>,
    pub los: Vec<bool>,
    pub elevation_deg: Vec<f64>,
    pub horizontal_db: Vec<f64>,
    /// Index into the deployment's wrap offsets of the copy in use.
    pub wrap_copy: Vec<u8>,
}

impl LinkBudget {
    /// Draws LoS state then shadowing in (UE, cell) order. With per-site
    /// sharing only the first sector of each site draws; its siblings reuse
    /// the values.
    pub fn draw(deployment: &Deployment, spec: &ScenarioSpec, rng: &mut Rng) -> Result<Self> {
        let n_cells = deployment.n_cells();
        let n_ues = deployment.n_ues();
        let n = n_cells * n_ues;
        let mut out = Self {
            n_cells,
            n_ues,
            h_hpbw_deg: spec.h_hpbw_deg,
            fixed_vhpbw_deg: spec.fixed_vhpbw_deg,
            kinds: deployment.kinds(),
            pl_db: Vec::with_capacity(n),
            sf_db: Vec::with_capacity(n),
            los: Vec::with_capacity(n),
            elevation_deg: Vec::with_capacity(n),
            horizontal_db: Vec::with_capacity(n),
            wrap_copy: Vec::with_capacity(n),
        };
        let shared = spec.large_scale == LargeScaleSharing::PerSite;
        let mut site_draw: Vec<Option<(bool, f64)>> = vec![None; deployment.sites.len()];
        for ue in &deployment.ues {
            site_draw.iter_mut().for_each(|s| *s = None);
            for cell in &deployment.cells {
                let site = deployment.sites[cell.site].pos;
                let (copy, bs) = nearest_copy(site, &deployment.wrap_offsets, ue.pos);
                let geom = LinkGeometry::between([bs[0], bs[1], deployment.bs_height], ue.pos);
                let (los, sf) = match site_draw[cell.site] {
                    Some(d) if shared => d,
                    _ => {
                        let los = los_draw(&geom, ue.kind, rng)?;
                        let sf = shadow_fading(rng, shadow_sigma_db(&geom, ue.kind, los)?);
                        site_draw[cell.site] = Some((los, sf));
                        (los, sf)
                    }
                };
                let pl = path_loss(&geom, ue.kind, los, spec.carrier_freq)?;
                out.pl_db.push(pl);
                out.sf_db.push(sf);
                out.los.push(los);
                out.elevation_deg.push(geom.elevation_deg);
                out.horizontal_db.push(plane_attenuation(
                    wrap_deg(geom.azimuth_deg - cell.bearing_deg),
                    spec.h_hpbw_deg,
                ));
                out.wrap_copy.push(copy as u8);
            }
        }
        Ok(out)
    }

    /// Compose `−PL + SF + antenna gain` for the given antenna settings.
    pub fn gain_table(&self, decision: &DecisionVector) -> Result<GainTable> {
        decision.validate(self.n_cells)?;
        let mut gains_db = Vec::with_capacity(self.pl_db.len());
        self.fill_gains(decision, &mut gains_db);
        Ok(GainTable {
            n_cells: self.n_cells,
            n_ues: self.n_ues,
            gains_db,
            los: self.los.clone(),
            sf_db: self.sf_db.clone(),
        })
    }

    /// Like [`Self::gain_table`] without validation or copying the static
    /// matrices; `out` is overwritten.
    pub fn fill_gains(&self, decision: &DecisionVector, out: &mut Vec<f64>) {
        out.clear();
        let peak: Vec<f64> = (0..self.n_cells)
            .map(|c| max_gain(decision.vhpbw(c, self.fixed_vhpbw_deg), self.h_hpbw_deg))
            .collect();
        for ue in 0..self.n_ues {
            let row = ue * self.n_cells;
            for c in 0..self.n_cells {
                let i = row + c;
                let v = decision.vhpbw(c, self.fixed_vhpbw_deg);
                let a_v = plane_attenuation(self.elevation_deg[i] - decision.tilts_deg[c], v);
                let a = combine_attenuation(self.horizontal_db[i], a_v);
                out.push(-self.pl_db[i] + self.sf_db[i] + peak[c] + a);
            }
        }
    }
}

fn nearest_copy(site: [f64; 2], offsets: &[[f64; 2]], ue: [f64; 3]) -> (usize, [f64; 2]) {
    let mut best = (0, site, f64::INFINITY);
    for (k, o) in offsets.iter().enumerate() {
        let p = [site[0] + o[0], site[1] + o[1]];
        let d = (ue[0] - p[0]).powi(2) + (ue[1] - p[1]).powi(2);
        if d < best.2 {
            best = (k, p, d);
        }
    }
    (best.0, best.1)
}

/// Large-scale gain, LoS state and shadowing for every (cell, UE) link.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable {
    pub n_cells: usize,
    pub n_ues: usize,
    /// UE-major; use [`GainTable::gain_db`] for (cell, UE) access.
    pub gains_db: Vec<f64>,
    pub los: Vec<bool>,
    pub sf_db: Vec<f64>,
}

impl GainTable {
    pub fn gain_db(&self, cell: usize, ue: usize) -> f64 {
        self.gains_db[ue * self.n_cells + cell]
    }

    pub fn is_los(&self, cell: usize, ue: usize) -> bool {
        self.los[ue * self.n_cells + cell]
    }

    pub fn shadow_db(&self, cell: usize, ue: usize) -> f64 {
        self.sf_db[ue * self.n_cells + cell]
    }

    /// Gains of every cell toward one UE.
    pub fn ue_row(&self, ue: usize) -> &[f64] {
        &self.gains_db[ue * self.n_cells..(ue + 1) * self.n_cells]
    }

    /// `cell_id,ue_id,gain_db,los` rows, cell-major.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["cell_id", "ue_id", "gain_db", "los"])?;
        for c in 0..self.n_cells {
            for u in 0..self.n_ues {
                wtr.write_record([
                    c.to_string(),
                    u.to_string(),
                    format!("{:.6}", self.gain_db(c, u)),
                    (self.is_los(c, u) as u8).to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// One-shot gain table for a deployment and decision.
pub fn build_gain_table(
    deployment: &Deployment,
    spec: &ScenarioSpec,
    decision: &DecisionVector,
    rng: &mut Rng,
) -> Result<GainTable> {
    LinkBudget::draw(deployment, spec, rng)?.gain_table(decision)
}
