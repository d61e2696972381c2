use faer::Mat;
use serde::Serialize;

use super::geometry::SiteSet;
use super::operator::{conjugate_sum, merge_registers, Operator};
use super::state::DensityMatrix;
use crate::error::{domain, Result};
use crate::linalg::{self, c64, CMat, ONE};

/// Choi matrices are only formed when `d_in · d_out` is at most this.
pub const CHOI_CAP: usize = 2048;

/// Sites offset used to label the reference copy when building Choi matrices.
const REF_OFFSET: usize = 1 << 40;

/// Labelled sites together with their local dimensions.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Register {
    pub sites: SiteSet,
    pub dims: Vec<usize>,
}

impl Register {
    pub fn new(sites: SiteSet, dims: Vec<usize>) -> Result<Self> {
        if sites.len() != dims.len() {
            return domain(format!("{} dimensions given for {} sites", dims.len(), sites.len()));
        }
        Ok(Self { sites, dims })
    }

    pub fn of(op: &Operator) -> Self {
        Self { sites: op.sites().clone(), dims: op.dims().to_vec() }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn union(&self, other: &Register) -> Result<Register> {
        let (sites, dims) = merge_registers((&self.sites, &self.dims), (&other.sites, &other.dims))?;
        Ok(Register { sites, dims })
    }

    pub fn difference(&self, sites: &SiteSet) -> Register {
        let keep = self.sites.difference(sites);
        let dims = keep.iter().map(|i| self.dims[self.sites.position(i).unwrap()]).collect();
        Register { sites: keep, dims }
    }

    pub fn restrict(&self, sites: &SiteSet) -> Result<Register> {
        if !sites.is_subset(&self.sites) {
            return domain(format!("{sites} is not inside {}", self.sites));
        }
        Ok(self.difference(&self.sites.difference(sites)))
    }

    pub fn identity(&self) -> Operator {
        Operator::identity(self.sites.clone(), self.dims.clone())
    }
}

#[derive(Clone, Debug)]
enum Map {
    Kraus(Vec<CMat>),
    TraceOut,
    Append(DensityMatrix),
    /// Applied first to last.
    Compose(Vec<Channel>),
    Sum(Vec<Channel>),
    Scale(f64, Box<Channel>),
}

/// Completely positive map between labelled registers.
///
/// Sites of the operand outside `input` are carried through unchanged. Maps are
/// kept in factored form (Kraus blocks, partial traces, appended states,
/// compositions, sums, non-negative scalings), so every channel is CP by
/// construction; the Choi matrix is derived on demand.
#[derive(Clone, Debug)]
pub struct Channel {
    input: Register,
    output: Register,
    map: Map,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChannelReport {
    pub cp: bool,
    /// `‖Φ†(1) − 1‖`, i.e. `‖Σ K†K − 1‖` for a Kraus map.
    pub tp_defect: f64,
    /// Largest eigenvalue of `Φ†(1)`; at most 1 for trace-non-increasing maps.
    pub max_effect_eig: f64,
    /// Smallest Choi eigenvalue; `None` when the Choi matrix exceeds `CHOI_CAP`.
    pub choi_min_eig: Option<f64>,
}

impl ChannelReport {
    pub fn is_tp(&self, tol: f64) -> bool {
        self.tp_defect <= tol
    }

    pub fn is_trace_non_increasing(&self, tol: f64) -> bool {
        self.max_effect_eig <= 1.0 + tol
    }
}

impl Channel {
    pub fn kraus(input: Register, output: Register, ops: Vec<CMat>) -> Result<Channel> {
        let (di, d_o) = (input.dim(), output.dim());
        if ops.is_empty() {
            return domain("a Kraus map needs at least one operator");
        }
        for k in &ops {
            if k.nrows() != d_o || k.ncols() != di {
                return domain(format!("Kraus operator is {}x{}, expected {d_o}x{di}", k.nrows(), k.ncols()));
            }
        }
        Ok(Channel { input, output, map: Map::Kraus(ops) })
    }

    /// `X ↦ K X K†` on one register.
    pub fn conjugation(reg: Register, k: CMat) -> Result<Channel> {
        Self::kraus(reg.clone(), reg, vec![k])
    }

    pub fn identity(reg: Register) -> Channel {
        let d = reg.dim();
        Channel { input: reg.clone(), output: reg, map: Map::Kraus(vec![linalg::identity(d)]) }
    }

    pub fn trace_out(reg: Register) -> Channel {
        Channel { input: reg, output: Register::empty(), map: Map::TraceOut }
    }

    /// `X ↦ X ⊗ σ`.
    pub fn append(state: DensityMatrix) -> Channel {
        let output = Register::of(state.op());
        Channel { input: Register::empty(), output, map: Map::Append(state) }
    }

    /// Discards `input` and prepares `state`.
    pub fn replace(input: Register, state: DensityMatrix) -> Result<Channel> {
        Self::compose(vec![Self::trace_out(input), Self::append(state)])
    }

    /// Sequential composition: `parts[0]` acts first.
    pub fn compose(parts: Vec<Channel>) -> Result<Channel> {
        if parts.is_empty() {
            return domain("empty composition");
        }
        if parts.len() == 1 {
            return Ok(parts.into_iter().next().unwrap());
        }
        // Track which sites the composite reads from the outside and which it leaves behind.
        let mut input = Register::empty();
        let mut live = Register::empty();
        let mut consumed = SiteSet::empty();
        for p in &parts {
            let external = p.input.difference(&live.sites);
            if !external.sites.is_disjoint(&consumed) {
                return domain(format!("composition reads sites {} after they were discarded", external.sites));
            }
            input = input.union(&external)?;
            live = live.union(&external)?;
            let dropped = live.sites.difference(&p.output.sites).intersection(&p.input.sites);
            consumed = consumed.union(&dropped);
            live = live.difference(&p.input.sites).union(&p.output)?;
        }
        let output = live;
        Ok(Channel { input, output, map: Map::Compose(parts) })
    }

    /// Parallel action on disjoint registers.
    pub fn tensor(parts: Vec<Channel>) -> Result<Channel> {
        for (i, a) in parts.iter().enumerate() {
            for b in &parts[i + 1..] {
                let ta = a.input.sites.union(&a.output.sites);
                let tb = b.input.sites.union(&b.output.sites);
                if !ta.is_disjoint(&tb) {
                    return domain("tensor factors act on overlapping sites");
                }
            }
        }
        Self::compose(parts)
    }

    /// `Σ_k Φ_k`; summands are widened with identities to a common input register.
    pub fn sum(parts: Vec<Channel>) -> Result<Channel> {
        if parts.is_empty() {
            return domain("empty sum");
        }
        let mut input = Register::empty();
        for p in &parts {
            input = input.union(&p.input)?;
        }
        let out_of = |p: &Channel| -> Result<Register> { input.difference(&p.input.sites).union(&p.output) };
        let output = out_of(&parts[0])?;
        for p in &parts[1..] {
            let o = out_of(p)?;
            if o != output {
                return domain(format!("summands produce different registers {} and {}", output.sites, o.sites));
            }
        }
        for p in &parts {
            let passthrough = input.difference(&p.input.sites);
            if !passthrough.sites.is_disjoint(&p.output.sites) {
                return domain("summand writes onto a site it does not read");
            }
        }
        Ok(Channel { input, output, map: Map::Sum(parts) })
    }

    pub fn scaled(self, s: f64) -> Result<Channel> {
        if !(s >= 0.0) || !s.is_finite() {
            return domain(format!("channel scale {s} must be finite and non-negative"));
        }
        Ok(Channel { input: self.input.clone(), output: self.output.clone(), map: Map::Scale(s, Box::new(self)) })
    }

    pub fn input(&self) -> &Register {
        &self.input
    }

    pub fn output(&self) -> &Register {
        &self.output
    }

    /// Kraus operators when the channel is a single Kraus block.
    pub fn kraus_ops(&self) -> Option<&[CMat]> {
        match &self.map {
            Map::Kraus(ops) => Some(ops),
            _ => None,
        }
    }

    /// Applies the map to `x`; sites of `x` outside the input register pass through.
    pub fn apply(&self, x: &Operator) -> Result<Operator> {
        match &self.map {
            Map::Kraus(ops) => conjugate_sum(x, ops, (&self.input.sites, &self.input.dims), (&self.output.sites, &self.output.dims)),
            Map::TraceOut => {
                if !self.input.sites.is_subset(x.sites()) {
                    return domain(format!("cannot trace out {}: support is {}", self.input.sites, x.sites()));
                }
                x.partial_trace(&x.sites().difference(&self.input.sites))
            }
            Map::Append(s) => {
                if !x.sites().is_disjoint(s.sites()) {
                    return domain(format!("appending onto occupied sites {}", s.sites()));
                }
                x.tensor(s.op())
            }
            Map::Compose(parts) => {
                let mut y = parts[0].apply(x)?;
                for p in &parts[1..] {
                    y = p.apply(&y)?;
                }
                Ok(y)
            }
            Map::Sum(parts) => {
                let mut acc = parts[0].apply(x)?;
                for p in &parts[1..] {
                    acc = acc.add(&p.apply(x)?)?;
                }
                Ok(acc)
            }
            Map::Scale(s, inner) => Ok(inner.apply(x)?.scale(*s)),
        }
    }

    /// Applies the Hilbert–Schmidt adjoint `Φ†` to an operator on the output side.
    pub fn apply_adjoint(&self, y: &Operator) -> Result<Operator> {
        // Output sites missing from `y` carry an implicit identity.
        let padded;
        let y = if self.output.sites.is_subset(y.sites()) {
            y
        } else {
            let reg = Register::of(y).union(&self.output)?;
            padded = y.extend_to(&reg.sites, &reg.dims)?;
            &padded
        };
        match &self.map {
            Map::Kraus(ops) => {
                let adj: Vec<CMat> = ops.iter().map(|k| linalg::adjoint(k.as_ref())).collect();
                conjugate_sum(y, &adj, (&self.output.sites, &self.output.dims), (&self.input.sites, &self.input.dims))
            }
            Map::TraceOut => {
                if !y.sites().is_disjoint(&self.input.sites) {
                    return domain("adjoint of a partial trace onto occupied sites");
                }
                let reg = Register::of(y).union(&self.input)?;
                y.extend_to(&reg.sites, &reg.dims)
            }
            Map::Append(s) => {
                let weighted = y.mul(s.op())?;
                weighted.partial_trace(&y.sites().difference(s.sites()))
            }
            Map::Compose(parts) => {
                let mut z = parts[parts.len() - 1].apply_adjoint(y)?;
                for p in parts[..parts.len() - 1].iter().rev() {
                    z = p.apply_adjoint(&z)?;
                }
                Ok(z)
            }
            Map::Sum(parts) => {
                let mut acc = parts[0].apply_adjoint(y)?;
                for p in &parts[1..] {
                    acc = acc.add(&p.apply_adjoint(y)?)?;
                }
                let reg = self.input.union(&Register::of(y).difference(&self.output.sites))?;
                acc.extend_to(&reg.sites, &reg.dims)
            }
            Map::Scale(s, inner) => Ok(inner.apply_adjoint(y)?.scale(*s)),
        }
    }

    /// The effect `Φ†(1)` on the input register.
    pub fn effect(&self) -> Result<Operator> {
        let e = self.apply_adjoint(&self.output.identity())?;
        e.extend_to(&self.input.sites, &self.input.dims)
    }

    /// Choi matrix `Σ_ij |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)`, reference register first.
    pub fn choi(&self) -> Result<CMat> {
        let d_in = self.input.dim();
        let d_out = self.output.dim();
        if d_in * d_out > CHOI_CAP {
            return domain(format!("Choi matrix of dimension {} exceeds the cap {CHOI_CAP}", d_in * d_out));
        }
        let ref_sites = SiteSet::new(self.input.sites.iter().map(|i| i + REF_OFFSET))?;
        let reg = Register::new(ref_sites.clone(), self.input.dims.clone())?.union(&self.input)?;
        // |Ω⟩ = Σ_i |i⟩_ref |i⟩_in with the reference sites ordered after the originals.
        let omega = Operator::new(reg.sites.clone(), reg.dims.clone(), {
            let d = d_in * d_in;
            Mat::from_fn(d, d, |r, c| {
                let (a, b) = (r / d_in, r % d_in);
                let (x, y) = (c / d_in, c % d_in);
                if a == b && x == y {
                    ONE
                } else {
                    c64::new(0.0, 0.0)
                }
            })
        })?;
        let out = self.apply(&omega)?;
        // Reorder to (reference, output) so the layout is the conventional one.
        let ref_reg = Register::new(ref_sites, self.input.dims.clone())?;
        let d_total = d_in * d_out;
        let out_pos: Vec<usize> = self.output.sites.iter().map(|i| out.sites().position(i).unwrap()).collect();
        let ref_pos: Vec<usize> = ref_reg.sites.iter().map(|i| out.sites().position(i).unwrap()).collect();
        let off_ref = super::operator::offsets(out.dims(), &ref_pos);
        let off_out = super::operator::offsets(out.dims(), &out_pos);
        Ok(Mat::from_fn(d_total, d_total, |r, c| {
            let (ri, ro) = (r / d_out, r % d_out);
            let (ci, co) = (c / d_out, c % d_out);
            out.matrix()[(off_ref[ri] + off_out[ro], off_ref[ci] + off_out[co])]
        }))
    }

    pub fn choi_min_eig(&self) -> Result<Option<f64>> {
        if self.input.dim() * self.output.dim() > CHOI_CAP {
            return Ok(None);
        }
        let j = self.choi()?;
        Ok(linalg::eigvalsh(linalg::hermitian_part(j.as_ref()).as_ref())?.first().copied())
    }

    /// CP verdict (Choi spectrum at −1e-10 when formed), TP defect and effect bound.
    pub fn validate(&self) -> Result<ChannelReport> {
        let effect = self.effect()?.hermitian()?;
        let eig = linalg::eigvalsh(effect.as_ref())?;
        let max_effect_eig = eig.last().copied().unwrap_or(0.0);
        let tp_defect = eig.iter().fold(0.0f64, |a, &x| a.max((x - 1.0).abs()));
        let choi_min_eig = self.choi_min_eig()?;
        // Without a Choi matrix the verdict rests on the factored form, which is CP by construction.
        let cp = choi_min_eig.map_or(true, |m| m >= -1e-10);
        Ok(ChannelReport { cp, tp_defect, max_effect_eig, choi_min_eig })
    }
}

/// Applies a channel to a state, returning the (possibly subnormalized) output operator.
pub fn channel_apply(ch: &Channel, state: &DensityMatrix) -> Result<Operator> {
    ch.apply(state.op())
}
