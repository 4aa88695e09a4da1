use serde::{Deserialize, Serialize};

use crate::butterfly::ButterflyStack;
use crate::exact::BPModuleExact;
use crate::numeric::{DenseMatrix, Field, Rng, C64};
use crate::perm::{HardPermutation, RelaxedPermutationStack};
use crate::{checked_log2, Error, Result};

/// One trainable `B P` module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BPModel {
    pub butterfly: ButterflyStack,
    pub permutation: RelaxedPermutationStack,
}

impl BPModel {
    pub fn new(butterfly: ButterflyStack, permutation: RelaxedPermutationStack) -> Result<Self> {
        if butterfly.size() != permutation.size() {
            return Err(Error::dims(butterfly.size(), permutation.size()));
        }
        Ok(Self { butterfly, permutation })
    }

    pub fn init_random(n: usize, field: Field, tied: bool, logit_std: f64, rng: &mut Rng) -> Result<Self> {
        let butterfly = ButterflyStack::init_random(n, field, rng)?;
        let permutation = RelaxedPermutationStack::init_random(n, tied, logit_std, rng)?;
        Self::new(butterfly, permutation)
    }

    /// Exact module whose permutation is expressible as a relaxed stack.
    pub fn from_exact(module: &BPModuleExact, permutation: RelaxedPermutationStack) -> Result<Self> {
        let (hard, _) = permutation.harden();
        if hard != module.permutation {
            return Err(Error::InvalidArgument("relaxed stack does not round to the module's permutation".into()));
        }
        Self::new(module.butterfly.clone(), permutation)
    }

    pub fn size(&self) -> usize {
        self.butterfly.size()
    }

    /// `B (P x)`.
    pub fn forward(&self, x: &[C64]) -> Result<Vec<C64>> {
        let mut y = self.permutation.relaxed_apply(x)?;
        self.butterfly.apply_in_place(&mut y);
        Ok(y)
    }
}

/// `S (M_1 ... M_k) Sᵀ` over `rN`, with an optional extra relaxed
/// permutation applied to the input first and an optional final real part.
/// `modules[0]` is the leftmost factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BPProductModel {
    #[serde(rename = "N")]
    pub n: usize,
    pub r: usize,
    pub modules: Vec<BPModel>,
    pub extra_permutation: Option<RelaxedPermutationStack>,
    pub post_real_part: bool,
}

/// Shape of a product model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub k: usize,
    pub r: usize,
}

impl ModelShape {
    pub const BP: ModelShape = ModelShape { k: 1, r: 1 };
    pub const BPBP: ModelShape = ModelShape { k: 2, r: 1 };

    /// `bp`, `bpbp`, or `bp^k_r` for other shapes.
    pub fn name(self) -> String {
        match (self.k, self.r) {
            (1, 1) => "bp".into(),
            (2, 1) => "bpbp".into(),
            (k, r) => format!("bp^{k}_{r}"),
        }
    }

    /// Parses `bp`, `bpbp` or `bp^k_r`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown architecture '{s}' (bp|bpbp|bp^k_r)"));
        match s.to_ascii_lowercase().as_str() {
            "bp" => Ok(Self::BP),
            "bpbp" => Ok(Self::BPBP),
            other => {
                let (k, r) = other.strip_prefix("bp^").and_then(|t| t.split_once('_')).ok_or_else(bad)?;
                let k: usize = k.parse().map_err(|_| bad())?;
                let r: usize = r.parse().map_err(|_| bad())?;
                if k == 0 || r == 0 {
                    return Err(bad());
                }
                Ok(Self { k, r })
            }
        }
    }
}

/// Random-initialization options for [`BPProductModel::init_random`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitOptions {
    pub field: Field,
    pub tie_logits: bool,
    pub logit_std: f64,
    /// Adds an input-side stack with only its coarsest level trainable.
    pub extra_permutation: bool,
    pub post_real_part: bool,
}

/// Location of one module's parameters in the flat vector.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ModuleLayout {
    /// Offset of level `j`'s `D1` (index `j - 1`); `D2..D4` follow, each `width * half` long.
    pub levels: Vec<usize>,
    pub logits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    /// 2 for complex fields (re, im), 1 for real.
    pub width: usize,
    pub modules: Vec<ModuleLayout>,
    pub extra_logits: Option<usize>,
    pub len: usize,
}

impl BPProductModel {
    pub fn new(
        n: usize,
        r: usize,
        modules: Vec<BPModel>,
        extra_permutation: Option<RelaxedPermutationStack>,
        post_real_part: bool,
    ) -> Result<Self> {
        checked_log2(n, 1)?;
        if r == 0 {
            return Err(Error::InvalidArgument("expansion factor must be at least 1".into()));
        }
        let big = n * r;
        checked_log2(big, 2)?;
        if modules.is_empty() {
            return Err(Error::InvalidArgument("a product needs at least one module".into()));
        }
        if let Some(bad) = modules.iter().find(|m| m.size() != big) {
            return Err(Error::dims(big, bad.size()));
        }
        let field = modules[0].butterfly.field();
        if modules.iter().any(|m| m.butterfly.field() != field) {
            return Err(Error::InvalidArgument("all modules must share one field".into()));
        }
        if let Some(p) = &extra_permutation {
            if p.size() != big {
                return Err(Error::dims(big, p.size()));
            }
        }
        Ok(Self { n, r, modules, extra_permutation, post_real_part })
    }

    pub fn init_random(n: usize, shape: ModelShape, opts: &InitOptions, rng: &mut Rng) -> Result<Self> {
        let big = n * shape.r;
        let modules = (0..shape.k)
            .map(|_| BPModel::init_random(big, opts.field, opts.tie_logits, opts.logit_std, rng))
            .collect::<Result<Vec<_>>>()?;
        let extra = if opts.extra_permutation {
            Some(RelaxedPermutationStack::init_coarsest(big, opts.logit_std, rng)?)
        } else {
            None
        };
        Self::new(n, shape.r, modules, extra, opts.post_real_part)
    }

    pub fn single(module: BPModel, post_real_part: bool) -> Result<Self> {
        let n = module.size();
        Self::new(n, 1, vec![module], None, post_real_part)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn inner_size(&self) -> usize {
        self.n * self.r
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape { k: self.modules.len(), r: self.r }
    }

    pub fn field(&self) -> Field {
        self.modules[0].butterfly.field()
    }

    /// Every relaxed permutation stack: module stacks in order, then the extra one.
    pub fn permutation_stacks(&self) -> impl Iterator<Item = &RelaxedPermutationStack> {
        self.modules.iter().map(|m| &m.permutation).chain(self.extra_permutation.iter())
    }

    fn permutation_stacks_mut(&mut self) -> impl Iterator<Item = &mut RelaxedPermutationStack> {
        self.modules.iter_mut().map(|m| &mut m.permutation).chain(self.extra_permutation.iter_mut())
    }

    /// Scalar entries (complex entries count once) plus all logits.
    pub fn param_count(&self) -> usize {
        let b: usize = self.modules.iter().map(|m| m.butterfly.param_count()).sum();
        b + self.logit_count()
    }

    pub fn logit_count(&self) -> usize {
        self.permutation_stacks().map(RelaxedPermutationStack::logit_count).sum()
    }

    pub fn entropy(&self) -> f64 {
        self.permutation_stacks().map(RelaxedPermutationStack::entropy).sum()
    }

    /// Largest `|p - round(p)|` over every stack.
    pub fn rounding_distance(&self) -> f64 {
        self.permutation_stacks().map(RelaxedPermutationStack::rounding_distance).fold(0.0, f64::max)
    }

    /// All permutation probabilities that affect the output (chunk-2 levels
    /// act as the identity whatever their logits, so they are left out).
    pub fn effective_probabilities(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for s in self.permutation_stacks() {
            let levels: Vec<usize> = if s.is_tied() {
                if s.size() > 2 {
                    vec![0]
                } else {
                    vec![]
                }
            } else {
                (0..s.depth()).filter(|&k| s.chunk(k) > 2).collect()
            };
            for k in levels {
                out.extend(s.level(k).probabilities());
            }
        }
        out
    }

    /// Same model with every permutation rounded to a hard choice.
    pub fn hardened(&self) -> Self {
        let mut out = self.clone();
        for s in out.permutation_stacks_mut() {
            *s = s.hardened_stack();
        }
        out
    }

    /// Hard permutation of each stack (module order, then extra).
    pub fn hard_permutations(&self) -> Vec<HardPermutation> {
        self.permutation_stacks().map(|s| s.harden().0).collect()
    }

    /// Applies the represented `N x N` matrix.
    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.n {
            return Err(Error::dims(self.n, x.len()));
        }
        let mut y = x.to_vec();
        y.resize(self.inner_size(), C64::new(0.0, 0.0));
        if let Some(p) = &self.extra_permutation {
            y = p.relaxed_apply(&y)?;
        }
        for m in self.modules.iter().rev() {
            y = m.forward(&y)?;
        }
        y.truncate(self.n);
        if self.post_real_part {
            y.iter_mut().for_each(|z| z.im = 0.0);
        }
        Ok(y)
    }

    /// Dense `N x N` matrix, one column per basis vector.
    pub fn expand(&self) -> DenseMatrix {
        let n = self.n;
        let mut m = DenseMatrix::zeros(n, n, Field::Complex);
        let mut e = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            e[j] = C64::new(1.0, 0.0);
            let col = self.apply(&e).expect("length matches");
            e[j] = C64::new(0.0, 0.0);
            for (i, z) in col.into_iter().enumerate() {
                m.set(i, j, z);
            }
        }
        if self.post_real_part || self.field() == Field::Real {
            m.real_part()
        } else {
            m
        }
    }

    pub(crate) fn layout(&self) -> Layout {
        let width = match self.field() {
            Field::Real => 1,
            Field::Complex => 2,
        };
        let mut off = 0;
        let mut modules = Vec::with_capacity(self.modules.len());
        for m in &self.modules {
            let mut levels = Vec::new();
            for lvl in m.butterfly.levels() {
                levels.push(off);
                off += 4 * width * lvl.half();
            }
            let logits = off;
            off += m.permutation.logit_count();
            modules.push(ModuleLayout { levels, logits });
        }
        let extra_logits = self.extra_permutation.as_ref().map(|p| {
            let o = off;
            off += p.logit_count();
            o
        });
        Layout { width, modules, extra_logits, len: off }
    }

    /// Number of real coordinates in [`Self::params_flat`].
    pub fn flat_len(&self) -> usize {
        self.layout().len
    }

    /// Real parameter vector: per module, butterfly levels `1..=m` with `D1..D4`
    /// (`re, im` interleaved for complex fields), then stored logits; the extra
    /// permutation's logits come last.
    pub fn params_flat(&self) -> Vec<f64> {
        let layout = self.layout();
        let mut out = Vec::with_capacity(layout.len);
        for m in &self.modules {
            for lvl in m.butterfly.levels() {
                for d in lvl.diagonals() {
                    for z in d {
                        out.push(z.re);
                        if layout.width == 2 {
                            out.push(z.im);
                        }
                    }
                }
            }
            for l in m.permutation.stored_levels() {
                out.extend_from_slice(&l.logits);
            }
        }
        if let Some(p) = &self.extra_permutation {
            for l in p.stored_levels() {
                out.extend_from_slice(&l.logits);
            }
        }
        out
    }

    pub fn set_params_flat(&mut self, theta: &[f64]) -> Result<()> {
        let layout = self.layout();
        if theta.len() != layout.len {
            return Err(Error::dims(layout.len, theta.len()));
        }
        let mut it = theta.iter().copied();
        let mut next = || it.next().expect("length checked");
        for m in &mut self.modules {
            for lvl in m.butterfly.levels_mut() {
                for d in lvl.diagonals_mut() {
                    for z in d.iter_mut() {
                        z.re = next();
                        z.im = if layout.width == 2 { next() } else { 0.0 };
                    }
                }
            }
            for l in m.permutation.stored_levels_mut() {
                l.logits = [next(), next(), next()];
            }
        }
        if let Some(p) = &mut self.extra_permutation {
            for l in p.stored_levels_mut() {
                l.logits = [next(), next(), next()];
            }
        }
        Ok(())
    }
}
