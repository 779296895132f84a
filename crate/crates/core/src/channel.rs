//! Link budget: UMi street-canyon pathloss and LoS probability, SNR with
//! a single dominant ray, MCS selection and NR downlink capacity.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{CandidateEdge, NodeId, ScenarioGraph};

/// OFDM symbols per slot (normal cyclic prefix).
const SYMBOLS_PER_SLOT: f64 = 14.0;
const SUBCARRIERS_PER_RB: f64 = 12.0;

/// Radio configuration of every gNB.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioParams {
    pub fc_ghz: f64,
    pub bandwidth_mhz: f64,
    pub rb_count: u32,
    pub numerology: u32,
    /// Fraction of slots used in downlink.
    pub dl_slot_ratio: f64,
    /// Control channel overhead.
    pub overhead: f64,
    pub noise_density_dbm_hz: f64,
    pub noise_figure_db: f64,
    /// Planar array size (rows, columns), identical at both link ends.
    pub antenna_elems: (u32, u32),
    pub mimo_layers: u32,
    pub tx_power_dbm: f64,
    pub max_bler: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            fc_ghz: 27.0,
            bandwidth_mhz: 400.0,
            rb_count: 132,
            numerology: 3,
            dl_slot_ratio: 0.7,
            overhead: 0.18,
            noise_density_dbm_hz: -174.0,
            noise_figure_db: 7.0,
            antenna_elems: (8, 8),
            mimo_layers: 1,
            tx_power_dbm: 33.0,
            max_bler: 0.1,
        }
    }
}

impl RadioParams {
    pub fn with_mimo_layers(mut self, layers: u32) -> Self {
        self.mimo_layers = layers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("fc_ghz", self.fc_ghz),
            ("bandwidth_mhz", self.bandwidth_mhz),
            ("rb_count", f64::from(self.rb_count)),
            ("mimo_layers", f64::from(self.mimo_layers)),
            ("antenna_elems", f64::from(self.antenna_elems.0 * self.antenna_elems.1)),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("dl_slot_ratio", self.dl_slot_ratio),
            ("overhead", self.overhead),
            ("max_bler", self.max_bler),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Parameter(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }

    /// Array gain of SVD beamforming over one dominant ray, in dB.
    pub fn beamforming_gain_db(&self) -> f64 {
        let per_side = f64::from(self.antenna_elems.0 * self.antenna_elems.1);
        10.0 * (per_side * per_side).log10()
    }

    /// Thermal noise power over the full bandwidth, in dBm.
    pub fn noise_floor_dbm(&self) -> f64 {
        self.noise_density_dbm_hz + 10.0 * (self.bandwidth_mhz * 1e6).log10() + self.noise_figure_db
    }

    /// Average OFDM symbol duration in seconds.
    pub fn symbol_duration_s(&self) -> f64 {
        1e-3 / f64::from(1u32 << self.numerology) / SYMBOLS_PER_SLOT
    }
}

/// UMi street-canyon pathloss in dB, `distance_m` being the 3D distance.
pub fn pathloss_db(distance_m: f64, los: bool, params: &RadioParams) -> Result<f64> {
    if !(distance_m.is_finite() && distance_m > 0.0) {
        return Err(Error::Parameter(format!("distance must be positive, got {distance_m}")));
    }
    let log_d = distance_m.log10();
    let log_f = params.fc_ghz.log10();
    let pl_los = 32.4 + 21.0 * log_d + 20.0 * log_f;
    if los {
        Ok(pl_los)
    } else {
        Ok(pl_los.max(22.4 + 35.3 * log_d + 21.3 * log_f))
    }
}

/// UMi outdoor line-of-sight probability at horizontal distance `distance_m`.
pub fn los_probability(distance_m: f64) -> f64 {
    if distance_m <= 18.0 {
        1.0
    } else {
        18.0 / distance_m + (-distance_m / 36.0).exp() * (1.0 - 18.0 / distance_m)
    }
}

pub fn link_snr_db(pathloss_db: f64, params: &RadioParams) -> f64 {
    params.tx_power_dbm - pathloss_db + params.beamforming_gain_db() - params.noise_floor_dbm()
}

/// One row of the SNR to MCS lookup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McsRow {
    pub snr_db: f64,
    pub mcs_index: u32,
    pub modulation_order: u32,
    pub code_rate: f64,
    pub bler: f64,
}

impl McsRow {
    pub fn spectral_efficiency(&self) -> f64 {
        f64::from(self.modulation_order) * self.code_rate
    }
}

/// SNR thresholds with the MCS and BLER observed at each, sorted by SNR.
#[derive(Clone, Debug, PartialEq)]
pub struct McsTable {
    rows: Vec<McsRow>,
}

const NR_256QAM_CSV: &str = include_str!("../assets/mcs_nr_256qam.csv");
const REFERENCE_4ROW_CSV: &str = include_str!("../assets/mcs_reference_4row.csv");

impl McsTable {
    pub fn new(rows: Vec<McsRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::parse("rows", "MCS table is empty"));
        }
        for (i, row) in rows.iter().enumerate() {
            if !row.snr_db.is_finite() {
                return Err(Error::parse(format!("rows[{i}].snr_db"), "not a finite number"));
            }
            if !matches!(row.modulation_order, 1 | 2 | 4 | 6 | 8 | 10) {
                return Err(Error::parse(
                    format!("rows[{i}].modulation_order"),
                    format!("unsupported modulation order {}", row.modulation_order),
                ));
            }
            if !(row.code_rate > 0.0 && row.code_rate <= 1.0) {
                return Err(Error::parse(format!("rows[{i}].code_rate"), "must lie in (0, 1]"));
            }
            if !(0.0..=1.0).contains(&row.bler) {
                return Err(Error::parse(format!("rows[{i}].bler"), "must lie in [0, 1]"));
            }
            if i > 0 && rows[i - 1].snr_db > row.snr_db {
                return Err(Error::parse(
                    format!("rows[{i}].snr_db"),
                    "rows must be sorted by ascending SNR",
                ));
            }
        }
        Ok(Self { rows })
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::parse("header", e.to_string()))?
            .clone();
        let expected = ["snr_db", "mcs_index", "modulation_order", "code_rate", "bler"];
        if headers.iter().ne(expected) {
            return Err(Error::parse("header", format!("expected `{}`", expected.join(","))));
        }
        let rows = reader
            .deserialize()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| Error::parse(format!("rows[{i}]"), e.to_string())))
            .collect::<Result<Vec<McsRow>>>()?;
        Self::new(rows)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    /// NR 256QAM PDSCH table with two BLER points per MCS.
    pub fn nr_256qam() -> Self {
        Self::from_csv_str(NR_256QAM_CSV).expect("bundled MCS table is valid")
    }

    /// Four-row table (MCS 0, 10, 19, 27) used by the test suites.
    pub fn reference() -> Self {
        Self::from_csv_str(REFERENCE_4ROW_CSV).expect("bundled MCS table is valid")
    }

    pub fn rows(&self) -> &[McsRow] {
        &self.rows
    }

    /// Checks that the usable rows, those below `max_bler`, have MCS indices
    /// strictly increasing with SNR.
    pub fn check_monotone(&self, max_bler: f64) -> Result<()> {
        let mut last: Option<(f64, u32)> = None;
        for (i, row) in self.rows.iter().enumerate().filter(|(_, r)| r.bler < max_bler) {
            if let Some((snr, mcs)) = last {
                if row.snr_db > snr && row.mcs_index <= mcs {
                    return Err(Error::parse(
                        format!("rows[{i}].mcs_index"),
                        "MCS index must increase with SNR among usable rows",
                    ));
                }
            }
            last = Some((row.snr_db, row.mcs_index));
        }
        Ok(())
    }
}

/// Highest MCS whose threshold is reached and whose BLER is below `max_bler`.
pub fn select_mcs(snr_db: f64, table: &McsTable, max_bler: f64) -> Option<&McsRow> {
    table
        .rows
        .iter()
        .filter(|r| r.bler < max_bler && snr_db >= r.snr_db)
        .max_by_key(|r| r.mcs_index)
}

/// NR downlink capacity of a link running `mcs`, in Mb/s.
pub fn link_capacity_mbps(mcs: &McsRow, params: &RadioParams) -> f64 {
    let re_rate = SUBCARRIERS_PER_RB * f64::from(params.rb_count) / params.symbol_duration_s();
    f64::from(params.mimo_layers)
        * mcs.spectral_efficiency()
        * re_rate
        * (1.0 - params.overhead)
        * params.dl_slot_ratio
        / 1e6
}

/// Capacity at a given SNR; zero when no MCS is feasible.
pub fn capacity_at_snr(snr_db: f64, table: &McsTable, params: &RadioParams) -> f64 {
    select_mcs(snr_db, table, params.max_bler).map_or(0.0, |m| link_capacity_mbps(m, params))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Line-of-sight draw for the unordered pair `{a, b}`.
pub fn los_draw(seed: u64, a: NodeId, b: NodeId, distance_m: f64) -> bool {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let key = splitmix64(splitmix64(splitmix64(seed) ^ lo as u64) ^ hi as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.random::<f64>() < los_probability(distance_m)
}

/// Fills the candidate edges of a graph from node positions.
///
/// LoS is drawn once per unordered pair, so both directions of a link get the
/// same SNR and capacity. Pairs without a feasible MCS get no edge.
pub fn populate_edges(
    graph: &ScenarioGraph,
    params: &RadioParams,
    table: &McsTable,
    seed: u64,
) -> Result<ScenarioGraph> {
    params.validate()?;
    let nodes = graph.nodes();
    let mut edges = Vec::new();
    for (i, a) in nodes.iter().enumerate() {
        for b in &nodes[i + 1..] {
            let d3 = a.position.distance(&b.position);
            if d3 <= 0.0 {
                log::warn!("nodes {} and {} are co-located; no link computed", a.id, b.id);
                continue;
            }
            let los = los_draw(seed, a.id, b.id, a.position.horizontal_distance(&b.position));
            let snr_db = link_snr_db(pathloss_db(d3, los, params)?, params);
            let Some(mcs) = select_mcs(snr_db, table, params.max_bler) else {
                continue;
            };
            let capacity_mbps = link_capacity_mbps(mcs, params);
            for (src, dst) in [(a.id, b.id), (b.id, a.id)] {
                edges.push(CandidateEdge {
                    src,
                    dst,
                    snr_db,
                    capacity_mbps,
                });
            }
        }
    }
    graph.with_edges(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_synthetic, Gnb, Position};

    fn table_row(snr: f64, mcs: u32, q: u32, r: f64, bler: f64) -> McsRow {
        McsRow {
            snr_db: snr,
            mcs_index: mcs,
            modulation_order: q,
            code_rate: r,
            bler,
        }
    }

    #[test]
    fn pathloss_los_at_100m() {
        let p = RadioParams::default();
        let expected = 32.4 + 21.0 * 2.0 + 20.0 * 27f64.log10();
        let pl = pathloss_db(100.0, true, &p).unwrap();
        assert!((pl - expected).abs() < 1e-12);
        assert!((pl - 103.03).abs() < 0.01);
    }

    #[test]
    fn pathloss_at_one_meter() {
        let pl = pathloss_db(1.0, true, &RadioParams::default()).unwrap();
        assert!((pl - 61.03).abs() < 0.01);
    }

    #[test]
    fn pathloss_nlos_at_100m() {
        let p = RadioParams::default();
        let pl = pathloss_db(100.0, false, &p).unwrap();
        let nlos = 22.4 + 35.3 * 2.0 + 21.3 * 27f64.log10();
        assert!((pl - nlos).abs() < 1e-12);
        assert!((pl - 123.49).abs() < 0.01);
        // close in, the LoS term dominates the max
        let los = pathloss_db(2.0, true, &p).unwrap();
        assert_eq!(pathloss_db(2.0, false, &p).unwrap(), los);
    }

    #[test]
    fn pathloss_rejects_non_positive_distance() {
        let p = RadioParams::default();
        assert!(matches!(pathloss_db(0.0, true, &p), Err(Error::Parameter(_))));
        assert!(matches!(pathloss_db(-3.0, false, &p), Err(Error::Parameter(_))));
    }

    #[test]
    fn los_probability_values() {
        assert_eq!(los_probability(10.0), 1.0);
        assert_eq!(los_probability(18.0), 1.0);
        let p36 = 0.5 + (-1f64).exp() * 0.5;
        assert!((los_probability(36.0) - p36).abs() < 1e-12);
        assert!((los_probability(36.0) - 0.684).abs() < 1e-3);
        assert!(los_probability(1e7) < 1e-5);
    }

    #[test]
    fn snr_with_table_params() {
        let p = RadioParams::default();
        assert!((p.beamforming_gain_db() - 36.12).abs() < 0.01);
        assert!((p.noise_floor_dbm() - (-80.98)).abs() < 0.01);
        let snr = link_snr_db(103.03, &p);
        assert!((snr - 47.1).abs() < 0.05, "{snr}");
        let zero_pl = p.tx_power_dbm + p.beamforming_gain_db() - p.noise_floor_dbm();
        assert!(link_snr_db(zero_pl, &p).abs() < 1e-12);
        assert!((link_snr_db(106.03, &p) - (snr - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn mcs_selection_edges() {
        let t = McsTable::reference();
        assert!(select_mcs(-20.0, &t, 0.1).is_none());
        assert_eq!(select_mcs(60.0, &t, 0.1).unwrap().mcs_index, 27);
        assert_eq!(select_mcs(10.0, &t, 0.1).unwrap().mcs_index, 10);
        assert_eq!(select_mcs(9.99, &t, 0.1).unwrap().mcs_index, 0);
    }

    #[test]
    fn mcs_selection_skips_high_bler_rows() {
        let t = McsTable::new(vec![
            table_row(0.0, 1, 2, 0.2, 0.01),
            table_row(5.0, 9, 4, 0.6, 0.5),
            table_row(8.0, 5, 4, 0.4, 0.02),
        ])
        .unwrap();
        assert_eq!(select_mcs(6.0, &t, 0.1).unwrap().mcs_index, 1);
        assert_eq!(select_mcs(9.0, &t, 0.1).unwrap().mcs_index, 5);
        assert!(t.check_monotone(0.1).is_ok());
        assert!(t.check_monotone(0.9).is_err());
    }

    #[test]
    fn bundled_tables_are_consistent() {
        for t in [McsTable::nr_256qam(), McsTable::reference()] {
            t.check_monotone(0.1).unwrap();
            let top = select_mcs(100.0, &t, 0.1).unwrap();
            assert_eq!((top.modulation_order, top.code_rate), (8, 0.9258));
        }
    }

    #[test]
    fn csv_header_and_order_are_checked() {
        assert!(McsTable::from_csv_str("snr,mcs\n1,2\n").is_err());
        let unsorted = "snr_db,mcs_index,modulation_order,code_rate,bler\n5,1,2,0.2,0.01\n1,0,2,0.1,0.01\n";
        match McsTable::from_csv_str(unsorted) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "rows[1].snr_db"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn capacity_top_mcs() {
        let p = RadioParams::default();
        let top = table_row(28.0, 27, 8, 0.9258, 0.05);
        let expected = 8.0 * 0.9258 * (1584.0 / (1e-3 / 8.0 / 14.0)) * 0.82 * 0.7 / 1e6;
        let c1 = link_capacity_mbps(&top, &p);
        assert!((c1 - expected).abs() < 1e-9);
        assert!((c1 - 754.0).abs() < 1.0);
        let c2 = link_capacity_mbps(&top, &p.clone().with_mimo_layers(2));
        assert_eq!(c2, 2.0 * c1);
        assert_eq!(capacity_at_snr(-30.0, &McsTable::reference(), &p), 0.0);
    }

    #[test]
    fn populate_close_pair_is_symmetric_los() {
        let nodes = vec![
            Gnb::new(0, Position::new(0.0, 0.0, 10.0)),
            Gnb::new(1, Position::new(10.0, 0.0, 10.0)),
        ];
        let g = ScenarioGraph::new(1000.0, 1.0, nodes, vec![]).unwrap();
        let p = RadioParams::default();
        let g = populate_edges(&g, &p, &McsTable::reference(), 5).unwrap();
        assert_eq!(g.edges().len(), 2);
        let (a, b) = (g.edge(0, 1).unwrap(), g.edge(1, 0).unwrap());
        assert_eq!(a.capacity_mbps, b.capacity_mbps);
        let los_snr = link_snr_db(pathloss_db(10.0, true, &p).unwrap(), &p);
        assert_eq!(a.snr_db, los_snr);
    }

    #[test]
    fn populate_drops_pairs_without_mcs() {
        let nodes = vec![
            Gnb::new(0, Position::new(0.0, 0.0, 10.0)),
            Gnb::new(1, Position::new(5000.0, 0.0, 10.0)),
        ];
        let g = ScenarioGraph::new(1000.0, 25.0, nodes, vec![]).unwrap();
        let g = populate_edges(&g, &RadioParams::default(), &McsTable::reference(), 1).unwrap();
        assert!(g.edges().is_empty());
    }

    #[test]
    fn populate_is_deterministic_and_dense() {
        let g = generate_synthetic(15, 45.0, 3).unwrap();
        let p = RadioParams::default();
        let a = populate_edges(&g, &p, &McsTable::reference(), 3).unwrap();
        let b = populate_edges(&g, &p, &McsTable::reference(), 3).unwrap();
        assert_eq!(a, b);
        // synthetic graphs are much denser than real deployments
        let density = a.edges().len() as f64 / (15.0 * 14.0);
        assert!(density > 0.5, "edge density {density}");
    }
}
