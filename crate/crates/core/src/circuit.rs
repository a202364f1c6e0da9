//! Qubit-level construction of the entangled preparation for `n = 2^m`.
//!
//! Layout, top to bottom: the first `m` qubits carry user 0's channel and
//! double as the control register; users 1…n−1 follow in `m`-qubit groups.
//! Qubit 0 is the most significant bit of the basis index, so a register of
//! `n·m` qubits indexes exactly like the `n`-qudit state.
//!
//! Two preparations are provided:
//!
//! * [`Variant::PaperFigure`]: `R^{⊗m}` on the control register, then one
//!   controlled block per branch `k ≥ 1` that copies `k` into every other
//!   group. The only branch phases are the signs from `R`, `(−1)^{popcount k}`.
//! * [`Variant::Corrected`]: Hadamards on the control register, and each
//!   controlled block also applies the branch phase `ω_n^{k·p}`, giving
//!   `(1/√n) Σ_k ω^{k·p} |k…k⟩` exactly.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{entangled_coefficient, AssignmentTuple, GameConfig};
use crate::qudit::{write_amplitude_dump, QuditState};

/// 24 qubits = 2^24 amplitudes, the `n = 8` register.
pub const MAX_REGISTER_WIDTH: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    PaperFigure,
    Corrected,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::PaperFigure => "paper-figure",
            Variant::Corrected => "corrected",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-figure" => Ok(Variant::PaperFigure),
            "corrected" => Ok(Variant::Corrected),
            other => Err(Error::InvalidConfig(format!(
                "unknown circuit variant `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Open (white) control: fires on 0.
    Zero,
    /// Filled (black) control: fires on 1.
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Control {
    pub qubit: usize,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateKind {
    /// `(1/√2)[[1, 1], [−1, 1]]` on each target.
    R,
    Hadamard,
    PauliX,
    /// `diag(1, e^{iθ})` on each target.
    Phase(f64),
    /// When the controls fire: multiply by `e^{iθ}` and flip every target.
    ControlledBlock {
        phase: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub controls: Vec<Control>,
}

impl Gate {
    pub fn new(kind: GateKind, targets: Vec<usize>) -> Self {
        Self {
            kind,
            targets,
            controls: Vec::new(),
        }
    }

    pub fn with_controls(mut self, controls: Vec<Control>) -> Self {
        self.controls = controls;
        self
    }

    pub fn validate(&self, width: usize) -> Result<()> {
        let mut used = vec![false; width];
        let control_qubits = self.controls.iter().map(|c| c.qubit);
        for q in self.targets.iter().copied().chain(control_qubits) {
            if q >= width {
                return Err(Error::CircuitValidation(format!(
                    "qubit {q} outside a register of width {width}"
                )));
            }
            if std::mem::replace(&mut used[q], true) {
                return Err(Error::CircuitValidation(format!(
                    "qubit {q} used more than once in one gate"
                )));
            }
        }
        if self.targets.is_empty() && !matches!(self.kind, GateKind::ControlledBlock { .. }) {
            return Err(Error::CircuitValidation("gate without targets".into()));
        }
        Ok(())
    }

    fn single_qubit_matrix(&self) -> Option<[Complex64; 4]> {
        let re = |x: f64| Complex64::new(x, 0.0);
        let s = FRAC_1_SQRT_2;
        match self.kind {
            GateKind::R => Some([re(s), re(s), re(-s), re(s)]),
            GateKind::Hadamard => Some([re(s), re(s), re(s), re(-s)]),
            GateKind::PauliX => Some([re(0.0), re(1.0), re(1.0), re(0.0)]),
            GateKind::Phase(theta) => {
                Some([re(1.0), re(0.0), re(0.0), Complex64::from_polar(1.0, theta)])
            }
            GateKind::ControlledBlock { .. } => None,
        }
    }
}

/// Dense register of `width` qubits; qubit 0 is the most significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitRegister {
    width: usize,
    amplitudes: Vec<Complex64>,
}

impl QubitRegister {
    pub fn zero(width: usize) -> Result<Self> {
        if width > MAX_REGISTER_WIDTH {
            return Err(Error::ResourceLimit {
                what: "register width",
                value: width,
                limit: MAX_REGISTER_WIDTH,
            });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << width];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self { width, amplitudes })
    }

    pub fn from_amplitudes(width: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != 1 << width {
            return Err(Error::Dimension {
                expected: 1 << width,
                actual: amplitudes.len(),
            });
        }
        Ok(Self { width, amplitudes })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn bit(&self, qubit: usize) -> usize {
        1 << (self.width - 1 - qubit)
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.width)?;
        let (mut ctrl_mask, mut ctrl_value) = (0usize, 0usize);
        for c in &gate.controls {
            ctrl_mask |= self.bit(c.qubit);
            if c.polarity == Polarity::One {
                ctrl_value |= self.bit(c.qubit);
            }
        }
        let fires = |i: usize| i & ctrl_mask == ctrl_value;

        match gate.single_qubit_matrix() {
            Some(u) => {
                for &q in &gate.targets {
                    let bit = self.bit(q);
                    for i in (0..self.amplitudes.len()).filter(|&i| i & bit == 0 && fires(i)) {
                        let (a0, a1) = (self.amplitudes[i], self.amplitudes[i | bit]);
                        self.amplitudes[i] = u[0] * a0 + u[1] * a1;
                        self.amplitudes[i | bit] = u[2] * a0 + u[3] * a1;
                    }
                }
            }
            None => {
                let GateKind::ControlledBlock { phase } = gate.kind else {
                    unreachable!()
                };
                let factor = Complex64::from_polar(1.0, phase);
                let flip = gate.targets.iter().fold(0, |m, &q| m | self.bit(q));
                // Pair i with i^flip once, from the side where flip's top bit is clear.
                let top = if flip == 0 {
                    0
                } else {
                    1 << (usize::BITS - 1 - flip.leading_zeros())
                };
                for i in 0..self.amplitudes.len() {
                    if !fires(i) || i & top != 0 {
                        continue;
                    }
                    if flip == 0 {
                        self.amplitudes[i] *= factor;
                    } else {
                        let j = i ^ flip;
                        let (a, b) = (self.amplitudes[i], self.amplitudes[j]);
                        self.amplitudes[i] = b * factor;
                        self.amplitudes[j] = a * factor;
                    }
                }
            }
        }
        Ok(())
    }

    /// Reinterpret as the `n`-qudit state; valid because `n = 2^m` makes the
    /// concatenated `m`-bit groups equal to the base-`n` index.
    pub fn into_qudit_state(self, n: usize) -> Result<QuditState> {
        let expected = register_width(n)?;
        if expected != self.width {
            return Err(Error::Dimension {
                expected,
                actual: self.width,
            });
        }
        QuditState::from_amplitudes(n, self.amplitudes)
    }

    pub fn write_dump<W: Write>(&self, out: W) -> io::Result<()> {
        write_amplitude_dump(&self.amplitudes, out)
    }
}

/// Apply `gates` in order to `|0…0⟩`.
pub fn run_circuit(gates: &[Gate], width: usize) -> Result<QubitRegister> {
    for gate in gates {
        gate.validate(width)?;
    }
    let mut register = QubitRegister::zero(width)?;
    for gate in gates {
        register.apply(gate)?;
    }
    Ok(register)
}

/// `log2 n`, or an error when `n` is not a power of two ≥ 2.
pub fn bits_per_channel(n: usize) -> Result<usize> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::UnsupportedSize(n));
    }
    Ok(n.trailing_zeros() as usize)
}

/// `n·log2 n`.
pub fn register_width(n: usize) -> Result<usize> {
    Ok(n * bits_per_channel(n)?)
}

pub fn build_preparation_circuit(config: &GameConfig, variant: Variant) -> Result<Vec<Gate>> {
    let n = config.n();
    let m = bits_per_channel(n)?;
    let control_register: Vec<usize> = (0..m).collect();
    let bit_of = |k: usize, b: usize| (k >> (m - 1 - b)) & 1 == 1;

    let mut gates = vec![match variant {
        Variant::PaperFigure => Gate::new(GateKind::R, control_register.clone()),
        Variant::Corrected => Gate::new(GateKind::Hadamard, control_register.clone()),
    }];

    for k in 1..n {
        let controls = control_register
            .iter()
            .map(|&qubit| Control {
                qubit,
                polarity: if bit_of(k, qubit) {
                    Polarity::One
                } else {
                    Polarity::Zero
                },
            })
            .collect();
        let targets = (1..n)
            .flat_map(|group| {
                (0..m)
                    .filter(move |&b| bit_of(k, b))
                    .map(move |b| group * m + b)
            })
            .collect();
        let phase = match variant {
            Variant::PaperFigure => 0.0,
            Variant::Corrected => {
                let turns = (k as u64 * config.effective_phase() as u64) % n as u64;
                TAU * turns as f64 / n as f64
            }
        };
        gates.push(Gate::new(GateKind::ControlledBlock { phase }, targets).with_controls(controls));
    }
    Ok(gates)
}

/// Run the chosen preparation and return it as an `n`-qudit state.
pub fn prepare_via_circuit(config: &GameConfig, variant: Variant) -> Result<QuditState> {
    let gates = build_preparation_circuit(config, variant)?;
    run_circuit(&gates, register_width(config.n())?)?.into_qudit_state(config.n())
}

/// Channel indices as concatenated `log2 n`-bit groups, user 0 first.
pub fn encode_tuple_as_bits(t: &AssignmentTuple) -> Result<String> {
    let n = t.len();
    let m = bits_per_channel(n)?;
    t.validate(n)?;
    Ok(t.channels().iter().map(|c| format!("{c:0m$b}")).collect())
}

pub fn decode_bits(bits: &str, n: usize) -> Result<AssignmentTuple> {
    let m = bits_per_channel(n)?;
    if bits.len() != n * m {
        return Err(Error::Dimension {
            expected: n * m,
            actual: bits.len(),
        });
    }
    (0..n)
        .map(|j| {
            usize::from_str_radix(&bits[j * m..(j + 1) * m], 2)
                .map_err(|_| Error::CircuitValidation(format!("not a bit string: `{bits}`")))
        })
        .collect::<Result<Vec<_>>>()
        .map(AssignmentTuple::new)
}

/// Comparison of a circuit preparation against the target entangled state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub n: usize,
    pub p: u64,
    pub variant: Variant,
    /// Over every basis state, not just the constant tuples.
    pub max_amplitude_deviation: f64,
    pub matches: bool,
    /// Circuit amplitude over target amplitude on branch `|k…k⟩`, `k = 0..n`.
    pub per_branch_phase_ratio: Vec<Complex64>,
    /// `q` with ratio_k = ω^{k·q} for every k, if one exists.
    pub single_phase_exponent: Option<usize>,
}

pub const AUDIT_TOLERANCE: f64 = 1e-10;

pub fn audit_preparation(config: &GameConfig, variant: Variant) -> Result<AuditReport> {
    let n = config.n();
    let state = prepare_via_circuit(config, variant)?;
    let target = QuditState::prepare_entangled(config)?;
    let max_amplitude_deviation = state
        .amplitudes()
        .iter()
        .zip(target.amplitudes())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let per_branch_phase_ratio = (0..n)
        .map(|k| {
            let t = AssignmentTuple::constant(n, k);
            Ok(state.amplitude(&t)? / entangled_coefficient(config, k)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let single_phase_exponent = (0..n).find(|&q| {
        per_branch_phase_ratio.iter().enumerate().all(|(k, r)| {
            let w = Complex64::from_polar(1.0, TAU * ((k * q) % n) as f64 / n as f64);
            (r - w).norm() < AUDIT_TOLERANCE
        })
    });
    Ok(AuditReport {
        n,
        p: config.p(),
        variant,
        max_amplitude_deviation,
        matches: max_amplitude_deviation < AUDIT_TOLERANCE,
        per_branch_phase_ratio,
        single_phase_exponent,
    })
}

/// Audit of the drawn preparation (R layer, no extra branch phases).
pub fn audit_figure(config: &GameConfig) -> Result<AuditReport> {
    audit_preparation(config, Variant::PaperFigure)
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateKind::R => f.write_str("r"),
            GateKind::Hadamard => f.write_str("h"),
            GateKind::PauliX => f.write_str("x"),
            GateKind::Phase(_) => f.write_str("phase"),
            GateKind::ControlledBlock { .. } => f.write_str("ctrl-block"),
        }
    }
}

/// Plain-text gate list: a `width` header, then one
/// `kind controls targets angle` line per gate. Controls are `qubit:polarity`
/// pairs (`0` open, `1` filled) or `-`; angles are radians.
pub fn write_circuit_text<W: Write>(gates: &[Gate], width: usize, mut out: W) -> io::Result<()> {
    writeln!(out, "width {width}")?;
    for gate in gates {
        let controls = if gate.controls.is_empty() {
            "-".to_string()
        } else {
            gate.controls
                .iter()
                .map(|c| {
                    format!(
                        "{}:{}",
                        c.qubit,
                        if c.polarity == Polarity::One { 1 } else { 0 }
                    )
                })
                .collect::<Vec<_>>()
                .join(",")
        };
        let targets = if gate.targets.is_empty() {
            "-".to_string()
        } else {
            gate.targets
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let angle = match gate.kind {
            GateKind::Phase(theta) | GateKind::ControlledBlock { phase: theta } => theta,
            _ => 0.0,
        };
        writeln!(out, "{} {controls} {targets} {angle:?}", gate.kind)?;
    }
    Ok(())
}

fn field_list(line: usize, field: &str) -> Result<Vec<&str>> {
    match field {
        "-" => Ok(Vec::new()),
        "" => Err(Error::CircuitValidation(format!(
            "line {line}: empty field"
        ))),
        _ => Ok(field.split(',').collect()),
    }
}

pub fn parse_circuit_text(text: &str) -> Result<(usize, Vec<Gate>)> {
    let bad = |line: usize, msg: &str| Error::CircuitValidation(format!("line {line}: {msg}"));
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (line_no, header) = lines.next().ok_or_else(|| bad(1, "missing width header"))?;
    let width = header
        .strip_prefix("width ")
        .and_then(|w| w.trim().parse().ok())
        .ok_or_else(|| bad(line_no, "expected `width <qubits>`"))?;

    let mut gates = Vec::new();
    for (line, content) in lines {
        let fields: Vec<&str> = content.split_whitespace().collect();
        let [kind, controls, targets, angle] = fields[..] else {
            return Err(bad(line, "expected 4 fields"));
        };
        let angle: f64 = angle.parse().map_err(|_| bad(line, "bad angle"))?;
        let kind = match kind {
            "r" => GateKind::R,
            "h" => GateKind::Hadamard,
            "x" => GateKind::PauliX,
            "phase" => GateKind::Phase(angle),
            "ctrl-block" => GateKind::ControlledBlock { phase: angle },
            other => return Err(bad(line, &format!("unknown gate kind `{other}`"))),
        };
        let controls = field_list(line, controls)?
            .into_iter()
            .map(|c| {
                let (q, pol) = c
                    .split_once(':')
                    .ok_or_else(|| bad(line, "control needs `q:polarity`"))?;
                let qubit = q.parse().map_err(|_| bad(line, "bad control qubit"))?;
                let polarity = match pol {
                    "0" => Polarity::Zero,
                    "1" => Polarity::One,
                    _ => return Err(bad(line, "polarity must be 0 or 1")),
                };
                Ok(Control { qubit, polarity })
            })
            .collect::<Result<Vec<_>>>()?;
        let targets = field_list(line, targets)?
            .into_iter()
            .map(|t| t.parse().map_err(|_| bad(line, "bad target qubit")))
            .collect::<Result<Vec<usize>>>()?;
        let gate = Gate {
            kind,
            targets,
            controls,
        };
        gate.validate(width)?;
        gates.push(gate);
    }
    Ok((width, gates))
}
