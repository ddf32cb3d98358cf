//! MCS selection under a BLER ceiling and the expected goodput per CSI age.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::LinkParams;
use crate::error::{invalid, Error, Result};
use crate::estimation::sinr_gain;
use crate::quadrature::{exponential_expectation, GaussLegendre, QuadratureConfig};
use crate::reward::RewardCurve;

/// Largest age `build_reward_curve` will tabulate.
pub const MAX_TABULATED_AGE: usize = 1 << 16;

/// Default BLER ceiling.
pub const DEFAULT_E_MAX: f64 = 0.10;

/// Slope of the default logistic BLER curves, per dB.
pub const DEFAULT_SLOPE_PER_DB: f64 = 2.0;

/// Offset of the default 50 % BLER point above the Shannon SNR of the rate.
pub const DEFAULT_GAP_DB: f64 = 2.0;

const LTE_RATES_JSON: &str = include_str!("../data/lte_cqi_rates.json");

/// Block error probability as a function of linear SINR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BlerCurve {
    /// 1 / (1 + exp(slope * (sinr_db - midpoint_db))).
    Logistic { slope_per_db: f64, midpoint_db: f64 },
    /// Piecewise linear in dB between grid points, clamped outside the grid.
    Tabulated { snr_db: Vec<f64>, bler: Vec<f64> },
}

impl BlerCurve {
    /// The default curve for an MCS of spectral efficiency `rate`: midpoint
    /// `DEFAULT_GAP_DB` above 10 log10(2^rate - 1).
    pub fn default_for_rate(rate: f64) -> Self {
        BlerCurve::Logistic {
            slope_per_db: DEFAULT_SLOPE_PER_DB,
            midpoint_db: 10.0 * (2f64.powf(rate) - 1.0).log10() + DEFAULT_GAP_DB,
        }
    }

    pub(crate) fn eval(&self, sinr: f64) -> f64 {
        let db = 10.0 * sinr.log10();
        let value = match self {
            BlerCurve::Logistic {
                slope_per_db,
                midpoint_db,
            } => 1.0 / (1.0 + (slope_per_db * (db - midpoint_db)).exp()),
            BlerCurve::Tabulated { snr_db, bler } => interpolate_db(snr_db, bler, db),
        };
        value.clamp(0.0, 1.0)
    }

    /// Smallest SINR at which the BLER is at most `target`, or `None` if the
    /// curve never gets there.
    pub fn min_sinr_for(&self, target: f64) -> Option<f64> {
        match self {
            BlerCurve::Logistic {
                slope_per_db,
                midpoint_db,
            } => {
                if target >= 1.0 {
                    return Some(0.0);
                }
                if target <= 0.0 {
                    return None;
                }
                let db = midpoint_db + ((1.0 - target) / target).ln() / slope_per_db;
                Some(10f64.powf(db / 10.0))
            }
            BlerCurve::Tabulated { snr_db, bler } => {
                if bler[0] <= target {
                    return Some(0.0);
                }
                let i = bler.iter().position(|b| *b <= target)?;
                let t = (bler[i - 1] - target) / (bler[i - 1] - bler[i]);
                let db = snr_db[i - 1] + t * (snr_db[i] - snr_db[i - 1]);
                Some(10f64.powf(db / 10.0))
            }
        }
    }
}

fn interpolate_db(grid: &[f64], values: &[f64], db: f64) -> f64 {
    let last = grid.len() - 1;
    if db.is_nan() || db <= grid[0] {
        return values[0];
    }
    if db >= grid[last] {
        return values[last];
    }
    let i = grid.partition_point(|g| *g <= db);
    let t = (db - grid[i - 1]) / (grid[i] - grid[i - 1]);
    values[i - 1] + t * (values[i] - values[i - 1])
}

/// One modulation-and-coding scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsEntry {
    pub cqi: u8,
    /// Information bits per symbol.
    pub rate: f64,
    pub curve: BlerCurve,
}

/// CQI -> rate mapping plus the BLER ceiling, as stored in the MCS config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsRates {
    pub e_max: f64,
    pub rates: BTreeMap<u8, f64>,
}

impl McsRates {
    /// Spectral efficiencies of the LTE 4-bit CQI table.
    pub fn lte_default() -> Self {
        serde_json::from_str(LTE_RATES_JSON).expect("bundled rate table parses")
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::TableFormat {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// MCS entries sorted by strictly increasing rate, with the BLER ceiling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsTable {
    entries: Vec<McsEntry>,
    e_max: f64,
}

impl McsTable {
    pub fn new(entries: Vec<McsEntry>, e_max: f64) -> Result<Self> {
        if !(e_max > 0.0 && e_max < 1.0) {
            return Err(invalid("e_max", format!("must lie in (0, 1), got {e_max}")));
        }
        if entries.is_empty() {
            return Err(invalid("entries", "MCS table is empty"));
        }
        for entry in &entries {
            if !(1..=15).contains(&entry.cqi) {
                return Err(invalid("cqi", format!("CQI {} outside 1..=15", entry.cqi)));
            }
            if !(entry.rate.is_finite() && entry.rate > 0.0) {
                return Err(invalid(
                    "rate",
                    format!("CQI {} has non-positive rate {}", entry.cqi, entry.rate),
                ));
            }
        }
        for pair in entries.windows(2) {
            if pair[1].rate <= pair[0].rate {
                return Err(invalid(
                    "rate",
                    format!(
                        "rates must strictly increase: CQI {} ({}) follows CQI {} ({})",
                        pair[1].cqi, pair[1].rate, pair[0].cqi, pair[0].rate
                    ),
                ));
            }
        }
        Ok(Self { entries, e_max })
    }

    /// Logistic default curves for every rate in `rates`.
    pub fn with_default_curves(rates: &McsRates) -> Result<Self> {
        let entries = rates
            .rates
            .iter()
            .map(|(&cqi, &rate)| McsEntry {
                cqi,
                rate,
                curve: BlerCurve::default_for_rate(rate),
            })
            .collect();
        Self::new(entries, rates.e_max)
    }

    /// The 15 LTE CQIs with default logistic curves and a 10 % ceiling.
    pub fn lte_default() -> Self {
        Self::with_default_curves(&McsRates::lte_default()).expect("bundled table is valid")
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    pub fn e_max(&self) -> f64 {
        self.e_max
    }

    pub fn max_rate(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.rate)
    }

    /// SINRs where each entry becomes admissible under the ceiling.
    pub fn feasibility_thresholds(&self) -> Vec<f64> {
        self.entries
            .iter()
            .filter_map(|e| e.curve.min_sinr_for(self.e_max))
            .collect()
    }
}

pub fn bler(sinr: f64, entry: &McsEntry) -> Result<f64> {
    if sinr.is_nan() || sinr < 0.0 {
        return Err(invalid("sinr", format!("must be >= 0, got {sinr}")));
    }
    Ok(entry.curve.eval(sinr))
}

/// Best admissible goodput R (1 - BLER) at this SINR, and the entry achieving
/// it. Zero with no entry when every MCS violates the ceiling.
pub fn max_goodput(sinr: f64, table: &McsTable) -> (f64, Option<&McsEntry>) {
    let mut best = (0.0, None);
    for entry in &table.entries {
        let b = entry.curve.eval(sinr);
        if b <= table.e_max {
            let goodput = entry.rate * (1.0 - b);
            if best.1.is_none() || goodput > best.0 {
                best = (goodput, Some(entry));
            }
        }
    }
    best
}

/// r(age): the goodput averaged over the received pilot, whose power |y|^2 is
/// exponential with mean P_p rho0 + sigma_n^2.
pub fn expected_goodput(
    age: u32,
    params: &LinkParams,
    table: &McsTable,
    quad: &QuadratureConfig,
) -> Result<f64> {
    quad.validate()?;
    params.validate()?;
    let rule = GaussLegendre::new(quad.nodes);
    expected_goodput_with(age, params, table, &rule)
}

fn expected_goodput_with(
    age: u32,
    params: &LinkParams,
    table: &McsTable,
    rule: &GaussLegendre,
) -> Result<f64> {
    let gain = sinr_gain(age, params)?;
    if gain <= 0.0 {
        return Ok(0.0);
    }
    let breakpoints: Vec<f64> = table
        .feasibility_thresholds()
        .into_iter()
        .map(|sinr| sinr / gain)
        .collect();
    let mean = params.pilot_power_mean();
    Ok(exponential_expectation(rule, mean, &breakpoints, |power| {
        max_goodput(gain * power, table).0
    }))
}

/// Tabulates r(1..=max_age).
pub fn build_reward_curve(
    params: &LinkParams,
    table: &McsTable,
    max_age: usize,
    quad: &QuadratureConfig,
) -> Result<RewardCurve> {
    if max_age == 0 || max_age > MAX_TABULATED_AGE {
        return Err(invalid(
            "max_age",
            format!("must lie in 1..={MAX_TABULATED_AGE}, got {max_age}"),
        ));
    }
    quad.validate()?;
    params.validate()?;
    let rule = GaussLegendre::new(quad.nodes);
    let values = (1..=max_age as u32)
        .map(|age| expected_goodput_with(age, params, table, &rule))
        .collect::<Result<Vec<_>>>()?;
    RewardCurve::new(values).map(|c| c.with_params(*params))
}

/// Loads per-CQI BLER curves from a `cqi,snr_db,bler` CSV and pairs them with
/// the rates in `rates`.
pub fn load_bler_table(path: &Path, rates: &McsRates) -> Result<McsTable> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_bler_table(file, path, rates)
}

pub fn parse_bler_table<R: Read>(reader: R, origin: &Path, rates: &McsRates) -> Result<McsTable> {
    let fail = |message: String| Error::TableFormat {
        path: origin.to_path_buf(),
        message,
    };
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = csv.headers().map_err(|e| fail(e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names != ["cqi", "snr_db", "bler"] {
        return Err(fail(format!("expected header `cqi,snr_db,bler`, found `{}`", names.join(","))));
    }

    let mut curves: Vec<(u8, Vec<f64>, Vec<f64>)> = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| fail(format!("row {row}: {e}")))?;
        let field = |k: usize| record.get(k).unwrap_or("");
        let cqi: u8 = field(0)
            .parse()
            .map_err(|_| fail(format!("row {row}: bad CQI `{}`", field(0))))?;
        let snr: f64 = field(1)
            .parse()
            .map_err(|_| fail(format!("row {row} (CQI {cqi}): bad snr_db `{}`", field(1))))?;
        let value: f64 = field(2)
            .parse()
            .map_err(|_| fail(format!("row {row} (CQI {cqi}): bad bler `{}`", field(2))))?;
        if !snr.is_finite() {
            return Err(fail(format!("row {row} (CQI {cqi}): non-finite snr_db")));
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(fail(format!("row {row} (CQI {cqi}): bler {value} outside [0, 1]")));
        }
        match curves.last_mut() {
            Some((last, grid, blers)) if *last == cqi => {
                if snr <= *grid.last().unwrap() {
                    return Err(fail(format!("row {row} (CQI {cqi}): snr_db grid is not strictly increasing")));
                }
                if value > *blers.last().unwrap() {
                    return Err(fail(format!("row {row}: non-monotone BLER curve for CQI {cqi} (BLER rises with SNR)")));
                }
                grid.push(snr);
                blers.push(value);
            }
            Some((last, _, _)) if *last > cqi => {
                return Err(fail(format!("row {row}: CQI {cqi} appears after CQI {last}; rows must be sorted by CQI")));
            }
            _ => curves.push((cqi, vec![snr], vec![value])),
        }
    }
    if curves.is_empty() {
        return Err(fail("no BLER rows".into()));
    }

    let entries = curves
        .into_iter()
        .map(|(cqi, snr_db, bler)| {
            let rate = *rates
                .rates
                .get(&cqi)
                .ok_or_else(|| fail(format!("CQI {cqi} has no rate in the MCS config")))?;
            Ok(McsEntry {
                cqi,
                rate,
                curve: BlerCurve::Tabulated { snr_db, bler },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    McsTable::new(entries, rates.e_max).map_err(|e| fail(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flat_entry(cqi: u8, rate: f64, value: f64) -> McsEntry {
        McsEntry {
            cqi,
            rate,
            curve: BlerCurve::Tabulated {
                snr_db: vec![0.0],
                bler: vec![value],
            },
        }
    }

    fn single_cqi_rates() -> McsRates {
        McsRates {
            e_max: 0.1,
            rates: [(1u8, 1.0), (2, 2.0)].into_iter().collect(),
        }
    }

    #[test]
    fn bler_at_zero_sinr_is_one() {
        for entry in McsTable::lte_default().entries() {
            assert!(bler(0.0, entry).unwrap() >= 1.0 - 1e-6);
        }
    }

    #[test]
    fn bler_at_midpoint_is_half() {
        let entry = McsEntry {
            cqi: 1,
            rate: 1.0,
            curve: BlerCurve::Logistic {
                slope_per_db: 1.3,
                midpoint_db: 4.0,
            },
        };
        let m = 10f64.powf(0.4);
        assert!((bler(m, &entry).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bler_rejects_negative_sinr() {
        let table = McsTable::lte_default();
        assert!(bler(-1e-3, &table.entries()[0]).is_err());
    }

    #[test]
    fn default_curves_are_monotone() {
        for entry in McsTable::lte_default().entries() {
            let mut previous = 1.0;
            for i in 0..1000 {
                let db = -30.0 + 60.0 * i as f64 / 999.0;
                let b = bler(10f64.powf(db / 10.0), entry).unwrap();
                assert!(b <= previous);
                previous = b;
            }
        }
    }

    #[test]
    fn default_table_orders_thresholds_by_rate() {
        let t = McsTable::lte_default();
        assert_eq!(t.entries().len(), 15);
        let th = t.feasibility_thresholds();
        assert!(th.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(t.e_max(), DEFAULT_E_MAX);
    }

    #[test]
    fn no_feasible_mcs_at_zero_sinr() {
        let table = McsTable::lte_default();
        let (g, e) = max_goodput(0.0, &table);
        assert_eq!(g, 0.0);
        assert!(e.is_none());
    }

    #[test]
    fn single_entry_goodput() {
        let table = McsTable::new(vec![flat_entry(3, 2.0, 0.05)], 0.1).unwrap();
        let (g, e) = max_goodput(5.0, &table);
        assert!((g - 1.9).abs() < 1e-12);
        assert_eq!(e.unwrap().cqi, 3);
    }

    #[test]
    fn ceiling_excludes_high_rate_entry() {
        let table =
            McsTable::new(vec![flat_entry(1, 1.0, 0.0), flat_entry(2, 4.0, 0.5)], 0.1).unwrap();
        let (g, e) = max_goodput(3.0, &table);
        assert_eq!(g, 1.0);
        assert_eq!(e.unwrap().cqi, 1);
    }

    #[test]
    fn max_goodput_monotone_and_bounded() {
        let t = McsTable::lte_default();
        let mut previous = 0.0;
        for i in 0..4000 {
            let db = -20.0 + 60.0 * i as f64 / 3999.0;
            let (g, _) = max_goodput(10f64.powf(db / 10.0), &t);
            assert!(g + 1e-15 >= previous, "dip at {db} dB");
            assert!(g <= t.max_rate());
            previous = g;
        }
    }

    #[test]
    fn table_rejects_bad_rates_and_ceiling() {
        assert!(McsTable::new(vec![flat_entry(1, 2.0, 0.0), flat_entry(2, 1.0, 0.0)], 0.1).is_err());
        assert!(McsTable::new(vec![flat_entry(1, 2.0, 0.0)], 1.0).is_err());
        assert!(McsTable::new(vec![], 0.1).is_err());
    }

    #[test]
    fn zero_correlation_gives_zero_reward() {
        // 2 pi f_d T_s = first zero of J0 at age 1
        let p = LinkParams {
            doppler_hz: 2.404_825_557_695_773 / (2.0 * std::f64::consts::PI * 1e-3),
            ..LinkParams::default()
        };
        let r = expected_goodput(1, &p, &McsTable::lte_default(), &QuadratureConfig::default())
            .unwrap();
        assert!(r < 1e-12, "{r}");
    }

    #[test]
    fn always_decodable_entry_gives_its_rate() {
        let table = McsTable::new(vec![flat_entry(4, 2.5, 0.0)], 0.1).unwrap();
        let p = LinkParams::default();
        for age in [1, 2, 5, 11] {
            let r = expected_goodput(age, &p, &table, &QuadratureConfig::default()).unwrap();
            assert!((r - 2.5).abs() < 1e-12, "age {age}: {r}");
        }
    }

    #[test]
    fn quadrature_rejects_few_nodes() {
        let err = expected_goodput(
            1,
            &LinkParams::default(),
            &McsTable::lte_default(),
            &QuadratureConfig { nodes: 4 },
        );
        assert!(err.is_err());
    }

    /// Dense midpoint rule in the CDF variable; slow but independent of the
    /// Gauss-Legendre segmentation.
    fn dense_oracle(age: u32, params: &LinkParams, table: &McsTable) -> f64 {
        let gain = sinr_gain(age, params).unwrap();
        let mean = params.pilot_power_mean();
        let n = 2_000_000;
        (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                max_goodput(gain * -mean * (-u).ln_1p(), table).0
            })
            .sum::<f64>()
            / n as f64
    }

    #[test]
    fn quadrature_matches_dense_oracle() {
        let table = McsTable::lte_default();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..6 {
            let snr = rng.random_range(0.0..25.0);
            let age = rng.random_range(1..6);
            let p = LinkParams::default().with_snr_db(snr);
            let quad = expected_goodput(age, &p, &table, &QuadratureConfig::default()).unwrap();
            let dense = dense_oracle(age, &p, &table);
            assert!(
                (quad - dense).abs() <= 1e-5 * dense.max(1e-3),
                "snr {snr} age {age}: {quad} vs {dense}"
            );
        }
    }

    #[test]
    fn reward_depends_on_age_only_through_correlation() {
        let table = McsTable::lte_default();
        let quad = QuadratureConfig::default();
        let fast = LinkParams::default().with_doppler_hz(50.0);
        let slow = LinkParams::default().with_doppler_hz(25.0);
        let a = expected_goodput(2, &fast, &table, &quad).unwrap();
        let b = expected_goodput(4, &slow, &table, &quad).unwrap();
        assert!((a - b).abs() <= 1e-14 * a.max(1.0));
    }

    #[test]
    fn reward_curve_shape() {
        let table = McsTable::lte_default();
        let curve =
            build_reward_curve(&LinkParams::default(), &table, 20, &QuadratureConfig::default())
                .unwrap();
        let again =
            build_reward_curve(&LinkParams::default(), &table, 20, &QuadratureConfig::default())
                .unwrap();
        assert_eq!(curve, again);
        // |rho| falls monotonically before the first Bessel zero, so the
        // maximum sits at age 1.
        let argmax = (1..=6).max_by(|a, b| curve.get(*a).total_cmp(&curve.get(*b))).unwrap();
        assert_eq!(argmax, 1);
        let single = build_reward_curve(&LinkParams::default(), &table, 1, &QuadratureConfig::default())
            .unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single.get(1), curve.get(1));
        assert!(curve.values().iter().all(|v| (0.0..=table.max_rate()).contains(v)));
    }

    #[test]
    fn reward_curve_rejects_zero_and_oversized_horizons() {
        let t = McsTable::lte_default();
        let q = QuadratureConfig::default();
        assert!(build_reward_curve(&LinkParams::default(), &t, 0, &q).is_err());
        assert!(build_reward_curve(&LinkParams::default(), &t, MAX_TABULATED_AGE + 1, &q).is_err());
    }

    #[test]
    fn static_channel_gives_flat_curve() {
        let p = LinkParams::default().with_doppler_hz(0.0);
        let c = build_reward_curve(&p, &McsTable::lte_default(), 10, &QuadratureConfig::default())
            .unwrap();
        assert!(c.values().iter().all(|v| *v == c.get(1)));
    }

    #[test]
    fn tabulated_curve_interpolates_in_db() {
        let csv = "cqi,snr_db,bler\n1,0,0.9\n1,10,0.01\n";
        let t = parse_bler_table(csv.as_bytes(), Path::new("mem.csv"), &single_cqi_rates()).unwrap();
        let e = &t.entries()[0];
        assert!((bler(10f64.powf(0.5), e).unwrap() - 0.455).abs() < 1e-12);
        assert!((bler(0.1, e).unwrap() - 0.9).abs() < 1e-12);
        assert!((bler(1e3, e).unwrap() - 0.01).abs() < 1e-12);
        // 10 % crossing at 0 + (0.9 - 0.1) / 0.89 * 10 dB
        let th = e.curve.min_sinr_for(0.1).unwrap();
        assert!((10.0 * th.log10() - 80.0 / 8.9).abs() < 1e-12);
    }

    #[test]
    fn table_loader_diagnostics() {
        let rates = single_cqi_rates();
        let origin = Path::new("mem.csv");
        let err = |text: &str| parse_bler_table(text.as_bytes(), origin, &rates).unwrap_err().to_string();
        assert!(err("cqi,snr_db,bler\n").contains("no BLER rows"));
        assert!(err("").contains("header") || err("").contains("no BLER rows"));
        assert!(err("cqi,snr_db,bler\n1,0,1.5\n").contains("outside [0, 1]"));
        assert!(err("cqi,snr_db,bler\n1,5,0.5\n1,0,0.1\n").contains("not strictly increasing"));
        let m = err("cqi,snr_db,bler\n1,0,0.5\n1,3,0.1\n2,0,0.9\n2,5,0.95\n");
        assert!(m.contains("non-monotone") && m.contains("CQI 2"), "{m}");
        assert!(err("cqi,snr_db,bler\n2,0,0.5\n1,3,0.1\n").contains("sorted"));
        assert!(err("cqi,snr_db,bler\n7,0,0.5\n").contains("CQI 7"));
        assert!(err("a,b,c\n1,0,0.5\n").contains("header"));
    }

    #[test]
    fn table_loader_rejects_non_increasing_rates() {
        let rates = McsRates {
            e_max: 0.1,
            rates: [(1u8, 2.0), (2, 1.0)].into_iter().collect(),
        };
        let csv = "cqi,snr_db,bler\n1,0,0.5\n2,0,0.5\n";
        let e = parse_bler_table(csv.as_bytes(), Path::new("m.csv"), &rates).unwrap_err();
        assert!(e.to_string().contains("CQI 2"));
    }

    #[test]
    fn bundled_rates_are_lte_cqi_efficiencies() {
        let r = McsRates::lte_default();
        assert_eq!(r.rates.len(), 15);
        assert_eq!(r.rates[&1], 0.1523);
        assert_eq!(r.rates[&15], 5.5547);
        assert_eq!(r.e_max, 0.1);
    }
}
