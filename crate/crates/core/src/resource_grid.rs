//! LTE downlink time-frequency lattice: system parameters, cell-specific
//! reference-signal placement and mapping of payload/pilots onto one slot.

use std::fmt;
use std::str::FromStr;

use crate::{Cplx, Error, Result};

/// Channel bandwidth profiles of the LTE downlink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bandwidth {
    Mhz1_25,
    Mhz2_5,
    Mhz5,
    Mhz10,
    Mhz15,
    Mhz20,
}

/// One row of the bandwidth table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthProfile {
    pub bandwidth_mhz: f64,
    pub n_prb: usize,
    pub sampling_mhz: f64,
    pub n_fft: usize,
    pub n_occupied: usize,
}

impl Bandwidth {
    pub const ALL: [Bandwidth; 6] = [
        Bandwidth::Mhz1_25,
        Bandwidth::Mhz2_5,
        Bandwidth::Mhz5,
        Bandwidth::Mhz10,
        Bandwidth::Mhz15,
        Bandwidth::Mhz20,
    ];

    pub fn profile(self) -> BandwidthProfile {
        let (bandwidth_mhz, n_prb, sampling_mhz, n_fft, n_occupied) = match self {
            Bandwidth::Mhz1_25 => (1.25, 6, 1.92, 128, 76),
            Bandwidth::Mhz2_5 => (2.5, 12, 3.84, 256, 151),
            Bandwidth::Mhz5 => (5.0, 25, 7.68, 512, 301),
            Bandwidth::Mhz10 => (10.0, 50, 15.36, 1024, 601),
            Bandwidth::Mhz15 => (15.0, 75, 23.04, 1536, 901),
            Bandwidth::Mhz20 => (20.0, 100, 30.72, 2048, 1201),
        };
        BandwidthProfile {
            bandwidth_mhz,
            n_prb,
            sampling_mhz,
            n_fft,
            n_occupied,
        }
    }

    pub fn mhz(self) -> f64 {
        self.profile().bandwidth_mhz
    }
}

impl FromStr for Bandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: f64 = s
            .trim()
            .trim_end_matches("MHz")
            .trim_end_matches("mhz")
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad bandwidth '{s}'")))?;
        Bandwidth::ALL
            .into_iter()
            .find(|b| (b.mhz() - v).abs() < 1e-9)
            .ok_or_else(|| Error::InvalidConfig(format!("no LTE profile for {v} MHz")))
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.mhz())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constellation {
    Qpsk,
    Qam16,
}

impl Constellation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Constellation::Qpsk => 2,
            Constellation::Qam16 => 4,
        }
    }
}

impl FromStr for Constellation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qpsk" => Ok(Constellation::Qpsk),
            "qam16" | "16qam" | "16-qam" => Ok(Constellation::Qam16),
            other => Err(Error::UnsupportedConstellation(other.to_string())),
        }
    }
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constellation::Qpsk => f.write_str("qpsk"),
            Constellation::Qam16 => f.write_str("qam16"),
        }
    }
}

/// OFDM symbols per slot with the normal (short) cyclic prefix.
pub const SYMBOLS_PER_SLOT_NORMAL_CP: usize = 7;
/// OFDM symbols per slot with the extended (long) cyclic prefix.
pub const SYMBOLS_PER_SLOT_EXTENDED_CP: usize = 6;

/// Static link parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Named bandwidth profile, if any. When set, `n_fft` must match it.
    pub bandwidth: Option<Bandwidth>,
    pub n_fft: usize,
    pub n_used: usize,
    pub cp_len: usize,
    pub n_symbols_per_slot: usize,
    pub n_tx: usize,
    pub n_rx: usize,
    pub constellation: Constellation,
}

impl Default for SystemConfig {
    /// 5 MHz, 300 used subcarriers, 16-sample CP, 2x2, QPSK.
    fn default() -> Self {
        Self {
            bandwidth: Some(Bandwidth::Mhz5),
            n_fft: 512,
            n_used: 300,
            cp_len: 16,
            n_symbols_per_slot: SYMBOLS_PER_SLOT_NORMAL_CP,
            n_tx: 2,
            n_rx: 2,
            constellation: Constellation::Qpsk,
        }
    }
}

impl SystemConfig {
    /// Configuration for a bandwidth profile. Uses all PRBs of the profile
    /// (12 subcarriers each) with the DC bin left empty.
    pub fn for_bandwidth(bw: Bandwidth) -> Self {
        let p = bw.profile();
        Self {
            bandwidth: Some(bw),
            n_fft: p.n_fft,
            n_used: 12 * p.n_prb,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_fft == 0 || self.n_used == 0 {
            return bad("n_fft and n_used must be positive".into());
        }
        if self.n_used >= self.n_fft {
            return bad(format!(
                "n_used ({}) must be smaller than n_fft ({})",
                self.n_used, self.n_fft
            ));
        }
        if self.cp_len >= self.n_fft {
            return bad(format!(
                "cp_len ({}) must be smaller than n_fft ({})",
                self.cp_len, self.n_fft
            ));
        }
        if let Some(bw) = self.bandwidth {
            let want = bw.profile().n_fft;
            if want != self.n_fft {
                return bad(format!(
                    "{bw} MHz profile requires n_fft {want}, got {}",
                    self.n_fft
                ));
            }
        }
        if self.n_symbols_per_slot != SYMBOLS_PER_SLOT_NORMAL_CP
            && self.n_symbols_per_slot != SYMBOLS_PER_SLOT_EXTENDED_CP
        {
            return bad(format!(
                "n_symbols_per_slot must be 7 or 6, got {}",
                self.n_symbols_per_slot
            ));
        }
        if !(1..=2).contains(&self.n_tx) || !(1..=2).contains(&self.n_rx) {
            return bad(format!(
                "n_tx and n_rx must be 1 or 2, got {}x{}",
                self.n_tx, self.n_rx
            ));
        }
        Ok(())
    }

    pub fn symbol_len(&self) -> usize {
        self.n_fft + self.cp_len
    }

    /// Signed baseband frequency index of used subcarrier `i`. Used
    /// subcarriers sit symmetrically around DC and skip the DC bin.
    pub fn subcarrier_frequency(&self, i: usize) -> i64 {
        let n_neg = (self.n_used / 2) as i64;
        let i = i as i64;
        if i < n_neg {
            i - n_neg
        } else {
            i - n_neg + 1
        }
    }

    /// FFT bin of used subcarrier `i`.
    pub fn subcarrier_bin(&self, i: usize) -> usize {
        self.subcarrier_frequency(i).rem_euclid(self.n_fft as i64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Data,
    Pilot,
    Null,
}

/// A resource element carrying a reference signal of one antenna port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PilotEntry {
    pub symbol: usize,
    pub subcarrier: usize,
    pub port: usize,
}

/// (subcarrier, symbol) position of a received pilot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PilotPosition {
    pub subcarrier: usize,
    pub symbol: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotPattern {
    /// Sorted by (symbol, subcarrier, port).
    pub entries: Vec<PilotEntry>,
    pub pilot_spacing: usize,
    pub n_used: usize,
    pub n_symbols: usize,
    pub n_ports: usize,
}

/// Pilot-bearing symbols of a normal-CP slot.
pub const PILOT_SYMBOLS: [usize; 2] = [0, 4];
pub const PILOT_SPACING: usize = 6;

impl PilotPattern {
    /// Entries of one port, ascending subcarrier within ascending symbol.
    pub fn port_entries(&self, port: usize) -> impl Iterator<Item = &PilotEntry> + '_ {
        self.entries.iter().filter(move |e| e.port == port)
    }

    pub fn port_positions(&self, port: usize) -> Vec<PilotPosition> {
        self.port_entries(port)
            .map(|e| PilotPosition {
                subcarrier: e.subcarrier,
                symbol: e.symbol,
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Places the cell-specific reference signals of up to two antenna ports.
///
/// Pilots occupy symbols 0 and 4 of the slot on a comb of every 6th
/// subcarrier. The symbol-4 comb is shifted by 3 subcarriers relative to
/// symbol 0, and port 1 is shifted by 3 relative to port 0, so the two
/// ports never share a resource element.
pub fn build_pilot_pattern(config: &SystemConfig) -> Result<PilotPattern> {
    config.validate()?;
    if config.n_symbols_per_slot != SYMBOLS_PER_SLOT_NORMAL_CP {
        return Err(Error::InvalidConfig(
            "extended cyclic prefix (6 symbols/slot) is not supported".into(),
        ));
    }
    if config.n_tx > 2 {
        return Err(Error::InvalidConfig(format!(
            "at most 2 antenna ports, got {}",
            config.n_tx
        )));
    }
    let half = PILOT_SPACING / 2;
    let mut entries = Vec::new();
    for (slot_pos, &symbol) in PILOT_SYMBOLS.iter().enumerate() {
        for port in 0..config.n_tx {
            let offset = (half * slot_pos + half * port) % PILOT_SPACING;
            entries.extend(
                (offset..config.n_used)
                    .step_by(PILOT_SPACING)
                    .map(|subcarrier| PilotEntry {
                        symbol,
                        subcarrier,
                        port,
                    }),
            );
        }
    }
    entries.sort();
    Ok(PilotPattern {
        entries,
        pilot_spacing: PILOT_SPACING,
        n_used: config.n_used,
        n_symbols: config.n_symbols_per_slot,
        n_ports: config.n_tx,
    })
}

/// Complex values of one antenna over one slot, indexed (subcarrier, symbol).
#[derive(Debug, Clone, PartialEq)]
pub struct FreqGrid {
    n_used: usize,
    n_symbols: usize,
    values: Vec<Cplx>,
}

impl FreqGrid {
    pub fn zeros(n_used: usize, n_symbols: usize) -> Self {
        Self {
            n_used,
            n_symbols,
            values: vec![Cplx::new(0.0, 0.0); n_used * n_symbols],
        }
    }

    /// Builds a grid from per-symbol columns of length `n_used`.
    pub fn from_columns(n_used: usize, columns: Vec<Vec<Cplx>>) -> Result<Self> {
        let n_symbols = columns.len();
        let mut values = Vec::with_capacity(n_used * n_symbols);
        for c in columns {
            if c.len() != n_used {
                return Err(Error::LengthMismatch {
                    what: "grid column",
                    expected: n_used,
                    actual: c.len(),
                });
            }
            values.extend(c);
        }
        Ok(Self {
            n_used,
            n_symbols,
            values,
        })
    }

    pub fn n_used(&self) -> usize {
        self.n_used
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn get(&self, subcarrier: usize, symbol: usize) -> Cplx {
        self.values[symbol * self.n_used + subcarrier]
    }

    pub fn set(&mut self, subcarrier: usize, symbol: usize, v: Cplx) {
        self.values[symbol * self.n_used + subcarrier] = v;
    }

    /// All subcarriers of one OFDM symbol.
    pub fn column(&self, symbol: usize) -> &[Cplx] {
        &self.values[symbol * self.n_used..(symbol + 1) * self.n_used]
    }
}

/// Transmit resource grid of one slot for every antenna port.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    antennas: Vec<FreqGrid>,
    /// Same layout as the antenna grids, one label vector per antenna.
    labels: Vec<Vec<CellKind>>,
}

impl ResourceGrid {
    pub fn n_tx(&self) -> usize {
        self.antennas.len()
    }

    pub fn n_used(&self) -> usize {
        self.antennas[0].n_used
    }

    pub fn n_symbols(&self) -> usize {
        self.antennas[0].n_symbols
    }

    pub fn antenna(&self, tx: usize) -> &FreqGrid {
        &self.antennas[tx]
    }

    pub fn get(&self, subcarrier: usize, symbol: usize, tx: usize) -> Cplx {
        self.antennas[tx].get(subcarrier, symbol)
    }

    pub fn label(&self, subcarrier: usize, symbol: usize, tx: usize) -> CellKind {
        self.labels[tx][symbol * self.n_used() + subcarrier]
    }

    pub fn data_count(&self, tx: usize) -> usize {
        self.labels[tx]
            .iter()
            .filter(|&&k| k == CellKind::Data)
            .count()
    }

    /// Data positions of one antenna in mapping order.
    pub fn data_positions(&self, tx: usize) -> Vec<(usize, usize)> {
        data_positions(&self.labels[tx], self.n_used(), self.n_symbols())
    }

    /// Payload of every antenna, in the order `map_to_grid` consumed it.
    pub fn extract_data(&self) -> Vec<Vec<Cplx>> {
        (0..self.n_tx())
            .map(|tx| {
                self.data_positions(tx)
                    .into_iter()
                    .map(|(sc, sym)| self.get(sc, sym, tx))
                    .collect()
            })
            .collect()
    }
}

fn data_positions(labels: &[CellKind], n_used: usize, n_symbols: usize) -> Vec<(usize, usize)> {
    (0..n_symbols)
        .flat_map(|sym| (0..n_used).map(move |sc| (sc, sym)))
        .filter(|&(sc, sym)| labels[sym * n_used + sc] == CellKind::Data)
        .collect()
}

/// Per-antenna labels for a pattern: pilot REs of a port are Null on every
/// other antenna.
pub fn label_cells(config: &SystemConfig, pattern: &PilotPattern) -> Vec<Vec<CellKind>> {
    let n = config.n_used;
    let mut labels = vec![vec![CellKind::Data; n * config.n_symbols_per_slot]; config.n_tx];
    for e in &pattern.entries {
        let idx = e.symbol * n + e.subcarrier;
        for (tx, l) in labels.iter_mut().enumerate() {
            if tx == e.port {
                l[idx] = CellKind::Pilot;
            } else if l[idx] != CellKind::Pilot {
                l[idx] = CellKind::Null;
            }
        }
    }
    labels
}

/// Number of data symbols each antenna needs to fill a slot.
pub fn data_capacity(config: &SystemConfig, pattern: &PilotPattern) -> Vec<usize> {
    label_cells(config, pattern)
        .iter()
        .map(|l| l.iter().filter(|&&k| k == CellKind::Data).count())
        .collect()
}

/// Fills a slot grid. Each antenna's data list is consumed symbol by symbol,
/// ascending subcarrier within a symbol. Pilot REs take `pilot_seq` values
/// in pattern order.
pub fn map_to_grid(
    config: &SystemConfig,
    pattern: &PilotPattern,
    data_symbols: &[Vec<Cplx>],
    pilot_seq: &[Cplx],
) -> Result<ResourceGrid> {
    config.validate()?;
    if pattern.n_used != config.n_used
        || pattern.n_symbols != config.n_symbols_per_slot
        || pattern.entries.iter().any(|e| e.port >= config.n_tx)
    {
        return Err(Error::InvalidConfig(
            "pilot pattern does not match system configuration".into(),
        ));
    }
    if data_symbols.len() != config.n_tx {
        return Err(Error::LengthMismatch {
            what: "per-antenna data lists",
            expected: config.n_tx,
            actual: data_symbols.len(),
        });
    }
    if pilot_seq.len() < pattern.len() {
        return Err(Error::Deficit {
            what: "pilot values",
            needed: pattern.len(),
            available: pilot_seq.len(),
        });
    }
    if let Some(i) = pilot_seq[..pattern.len()]
        .iter()
        .position(|p| (p.norm() - 1.0).abs() > 1e-9)
    {
        return Err(Error::InvalidArgument(format!(
            "pilot value {i} is not unit modulus"
        )));
    }

    let labels = label_cells(config, pattern);
    let mut antennas = Vec::with_capacity(config.n_tx);
    for (tx, data) in data_symbols.iter().enumerate() {
        let positions = data_positions(&labels[tx], config.n_used, config.n_symbols_per_slot);
        if data.len() < positions.len() {
            return Err(Error::Deficit {
                what: "data symbols",
                needed: positions.len(),
                available: data.len(),
            });
        }
        if data.len() > positions.len() {
            return Err(Error::LengthMismatch {
                what: "data symbols",
                expected: positions.len(),
                actual: data.len(),
            });
        }
        let mut g = FreqGrid::zeros(config.n_used, config.n_symbols_per_slot);
        for (&(sc, sym), &v) in positions.iter().zip(data) {
            g.set(sc, sym, v);
        }
        antennas.push(g);
    }
    for (e, &p) in pattern.entries.iter().zip(pilot_seq) {
        antennas[e.port].set(e.subcarrier, e.symbol, p);
    }
    Ok(ResourceGrid { antennas, labels })
}

/// Received values at the pilot REs of `port`, ascending subcarrier within
/// ascending symbol, with their positions.
pub fn extract_pilots(
    grid_rx: &FreqGrid,
    pattern: &PilotPattern,
    port: usize,
) -> Result<(Vec<Cplx>, Vec<PilotPosition>)> {
    if grid_rx.n_used != pattern.n_used || grid_rx.n_symbols != pattern.n_symbols {
        return Err(Error::InvalidArgument(format!(
            "grid is {}x{} but pattern expects {}x{}",
            grid_rx.n_used, grid_rx.n_symbols, pattern.n_used, pattern.n_symbols
        )));
    }
    let positions = pattern.port_positions(port);
    if positions.is_empty() {
        return Err(Error::UnknownPort(port));
    }
    let y = positions
        .iter()
        .map(|p| grid_rx.get(p.subcarrier, p.symbol))
        .collect();
    Ok((y, positions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn cfg(n_used: usize, n_tx: usize) -> SystemConfig {
        SystemConfig {
            bandwidth: None,
            n_fft: 64,
            n_used,
            n_tx,
            ..SystemConfig::default()
        }
    }

    fn subcarriers(p: &PilotPattern, port: usize, symbol: usize) -> Vec<usize> {
        p.port_entries(port)
            .filter(|e| e.symbol == symbol)
            .map(|e| e.subcarrier)
            .collect()
    }

    #[test]
    fn single_prb_port0() {
        let p = build_pilot_pattern(&cfg(12, 1)).unwrap();
        assert_eq!(subcarriers(&p, 0, 0), vec![0, 6]);
        assert_eq!(subcarriers(&p, 0, 4), vec![3, 9]);
        assert_eq!(p.len(), 4);
    }

    #[test]
    fn single_prb_port1_disjoint() {
        let p = build_pilot_pattern(&cfg(12, 2)).unwrap();
        assert_eq!(subcarriers(&p, 1, 0), vec![3, 9]);
        assert_eq!(subcarriers(&p, 1, 4), vec![0, 6]);
        let port0: HashSet<_> = p.port_positions(0).into_iter().collect();
        assert!(p.port_positions(1).iter().all(|q| !port0.contains(q)));
    }

    #[test]
    fn rejects_extended_cp_and_bad_ports() {
        let mut c = cfg(12, 1);
        c.n_symbols_per_slot = 6;
        assert!(build_pilot_pattern(&c).is_err());
        let mut c = cfg(12, 1);
        c.n_tx = 3;
        assert!(build_pilot_pattern(&c).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SystemConfig::default().validate().is_ok());
        let mut c = SystemConfig::default();
        c.n_fft = 1024;
        assert!(c.validate().is_err(), "5 MHz needs n_fft 512");
        let mut c = SystemConfig::default();
        c.n_used = 512;
        assert!(c.validate().is_err());
        let mut c = SystemConfig::default();
        c.cp_len = 600;
        assert!(c.validate().is_err());
        for bw in Bandwidth::ALL {
            SystemConfig::for_bandwidth(bw).validate().unwrap();
        }
        assert_eq!(SystemConfig::for_bandwidth(Bandwidth::Mhz5).n_used, 300);
        assert_eq!("5".parse::<Bandwidth>().unwrap(), Bandwidth::Mhz5);
        assert_eq!("1.25".parse::<Bandwidth>().unwrap(), Bandwidth::Mhz1_25);
        assert!("7".parse::<Bandwidth>().is_err());
    }

    #[test]
    fn subcarrier_placement_skips_dc() {
        let c = SystemConfig::default();
        assert_eq!(c.subcarrier_frequency(0), -150);
        assert_eq!(c.subcarrier_frequency(149), -1);
        assert_eq!(c.subcarrier_frequency(150), 1);
        assert_eq!(c.subcarrier_frequency(299), 150);
        assert_eq!(c.subcarrier_bin(0), 362);
        assert_eq!(c.subcarrier_bin(150), 1);
        let bins: HashSet<_> = (0..300).map(|i| c.subcarrier_bin(i)).collect();
        assert_eq!(bins.len(), 300);
        assert!(!bins.contains(&0));
    }

    #[test]
    fn pilot_only_grid_has_no_data_cells() {
        // Every RE is pilot or null: 1 subcarrier, 2 ports, comb offsets 0 and 3
        // collapse onto subcarrier 0 only for port 0.
        let c = cfg(1, 1);
        let p = PilotPattern {
            entries: (0..7)
                .map(|symbol| PilotEntry {
                    symbol,
                    subcarrier: 0,
                    port: 0,
                })
                .collect(),
            pilot_spacing: 6,
            n_used: 1,
            n_symbols: 7,
            n_ports: 1,
        };
        let pilots = vec![Cplx::new(1.0, 0.0); 7];
        let g = map_to_grid(&c, &p, &[vec![]], &pilots).unwrap();
        assert_eq!(g.data_count(0), 0);
    }

    #[test]
    fn symbol_without_pilots_is_all_data() {
        let c = cfg(12, 1);
        let p = build_pilot_pattern(&c).unwrap();
        let n = data_capacity(&c, &p)[0];
        let data: Vec<Cplx> = (0..n).map(|i| Cplx::new(i as f64, 1.0)).collect();
        let pilots = vec![Cplx::new(0.0, 1.0); p.len()];
        let g = map_to_grid(&c, &p, &[data], &pilots).unwrap();
        for sc in 0..12 {
            assert_eq!(g.label(sc, 1, 0), CellKind::Data);
        }
    }

    #[test]
    fn deficit_is_reported() {
        let c = cfg(12, 2);
        let p = build_pilot_pattern(&c).unwrap();
        let caps = data_capacity(&c, &p);
        let pilots = vec![Cplx::new(1.0, 0.0); p.len()];
        let short = vec![vec![Cplx::default(); caps[0] - 5], vec![Cplx::default(); caps[1]]];
        match map_to_grid(&c, &p, &short, &pilots) {
            Err(e @ Error::Deficit { needed, available, .. }) => {
                assert_eq!(needed - available, 5);
                assert!(e.to_string().contains("short by 5"));
            }
            other => panic!("expected deficit, got {other:?}"),
        }
        let full = vec![vec![Cplx::default(); caps[0]]; 2];
        assert!(matches!(
            map_to_grid(&c, &p, &full, &pilots[..3]),
            Err(Error::Deficit { what: "pilot values", .. })
        ));
    }

    #[test]
    fn extract_all_ones_pilots() {
        let c = cfg(24, 2);
        let p = build_pilot_pattern(&c).unwrap();
        let caps = data_capacity(&c, &p);
        let data: Vec<Vec<Cplx>> = caps.iter().map(|&n| vec![Cplx::new(0.5, -0.5); n]).collect();
        let pilots = vec![Cplx::new(1.0, 0.0); p.len()];
        let g = map_to_grid(&c, &p, &data, &pilots).unwrap();
        let (y, pos) = extract_pilots(g.antenna(0), &p, 0).unwrap();
        assert_eq!(y.len(), p.port_entries(0).count());
        assert_eq!(pos.len(), y.len());
        assert!(y.iter().all(|v| *v == Cplx::new(1.0, 0.0)));
        // ascending subcarrier within ascending symbol
        assert!(pos
            .windows(2)
            .all(|w| (w[0].symbol, w[0].subcarrier) < (w[1].symbol, w[1].subcarrier)));
        assert!(matches!(
            extract_pilots(g.antenna(0), &p, 1).map(|_| ()),
            Ok(())
        ));
        assert!(matches!(
            extract_pilots(g.antenna(0), &p, 2),
            Err(Error::UnknownPort(2))
        ));
    }

    proptest! {
        #[test]
        fn pattern_invariants(n_used in 1usize..200, n_tx in 1usize..=2) {
            let c = SystemConfig { bandwidth: None, n_fft: 256, n_used, n_tx, ..SystemConfig::default() };
            let p = build_pilot_pattern(&c).unwrap();
            let mut seen = HashSet::new();
            for e in &p.entries {
                prop_assert!(e.subcarrier < n_used && e.symbol < 7 && e.port < n_tx);
                prop_assert!(seen.insert((e.subcarrier, e.symbol)), "RE shared between ports");
            }
            for port in 0..n_tx {
                for (slot_pos, sym) in PILOT_SYMBOLS.into_iter().enumerate() {
                    let sc = subcarriers(&p, port, sym);
                    prop_assert!(sc.windows(2).all(|w| w[1] - w[0] == p.pilot_spacing));
                    let offset = (3 * slot_pos + 3 * port) % 6;
                    if let Some(&first) = sc.first() {
                        prop_assert_eq!(first, offset);
                    }
                    let expected = (n_used.saturating_sub(offset)).div_ceil(PILOT_SPACING);
                    prop_assert_eq!(sc.len(), expected);
                    prop_assert!(sc.len() <= n_used.div_ceil(PILOT_SPACING));
                }
            }
            // Pilot/Null complementarity.
            let labels = label_cells(&c, &p);
            for e in &p.entries {
                let idx = e.symbol * n_used + e.subcarrier;
                for (tx, l) in labels.iter().enumerate() {
                    let want = if tx == e.port { CellKind::Pilot } else { CellKind::Null };
                    prop_assert_eq!(l[idx], want);
                }
            }
        }

        #[test]
        fn data_round_trip(n_used in 1usize..120, n_tx in 1usize..=2, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let c = SystemConfig { bandwidth: None, n_fft: 128, n_used, n_tx, ..SystemConfig::default() };
            let p = build_pilot_pattern(&c).unwrap();
            let data: Vec<Vec<Cplx>> = data_capacity(&c, &p)
                .into_iter()
                .map(|n| (0..n).map(|_| Cplx::new(rng.random(), rng.random())).collect())
                .collect();
            let pilots: Vec<Cplx> = (0..p.len())
                .map(|_| Cplx::from_polar(1.0, rng.random::<f64>() * 6.0))
                .collect();
            let g = map_to_grid(&c, &p, &data, &pilots).unwrap();
            prop_assert_eq!(g.extract_data(), data);
            for tx in 0..n_tx {
                for sym in 0..7 {
                    for sc in 0..n_used {
                        let v = g.get(sc, sym, tx);
                        match g.label(sc, sym, tx) {
                            CellKind::Null => prop_assert_eq!(v, Cplx::new(0.0, 0.0)),
                            CellKind::Pilot => prop_assert!((v.norm() - 1.0).abs() < 1e-12),
                            CellKind::Data => {}
                        }
                    }
                }
            }
        }
    }
}
