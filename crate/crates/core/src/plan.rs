//! Binary-tree block schedule.
//!
//! Sites are zero-based here. Layer 1 cuts the chain into `2^{M-1}` blocks;
//! each acted block keeps its last `p` sites and zero-projects the rest.
//! Layer `j >= 2` pairs up neighbouring carried sets.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPlan {
    /// One-based block index within its layer.
    pub i: usize,
    /// Original site labels, ascending and contiguous in the current register.
    pub support: Vec<usize>,
    /// The last `p` sites of the support (the whole support for idle blocks).
    pub carried: Vec<usize>,
    /// Number of leading support sites projected onto `|0>`.
    pub projected: usize,
    /// Whether a unitary is applied (false only for idle first-layer blocks).
    pub acted: bool,
    /// Offset of the support inside the register the layer acts on.
    pub register_offset: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layer {
    pub j: usize,
    pub blocks: Vec<BlockPlan>,
    /// Register size before the layer.
    pub register_len: usize,
}

impl Layer {
    pub fn projected(&self) -> usize {
        self.blocks.iter().map(|b| b.projected).sum()
    }

    /// Original site labels of the register after the layer.
    pub fn carried_register(&self) -> Vec<usize> {
        self.blocks.iter().flat_map(|b| b.carried.iter().copied()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerPlan {
    pub n: usize,
    pub d: usize,
    pub p: usize,
    pub depth: usize,
    pub ell1: usize,
    pub s1: usize,
    pub k1: usize,
    /// Set when the remainder vanished and `s1` was raised from 0 to `p`.
    pub s1_amended: bool,
    pub layers: Vec<Layer>,
}

impl LayerPlan {
    pub fn layer(&self, j: usize) -> &Layer {
        &self.layers[j - 1]
    }

    /// `f(j, i)`.
    pub fn f(&self, j: usize, i: usize) -> usize {
        self.layers[j - 1].blocks[i - 1].projected
    }

    pub fn total_projected(&self) -> usize {
        self.layers.iter().map(Layer::projected).sum()
    }

    /// The `p` sites left after the last layer.
    pub fn final_sites(&self) -> Vec<usize> {
        self.layers.last().map(Layer::carried_register).unwrap_or_default()
    }

    /// Checks every structural invariant; returns a description of the first
    /// violation.
    pub fn check(&self) -> Result<()> {
        let fail = |msg: alloc::string::String| Err(Error::MalformedCircuit(msg));
        if self.depth == 0 || self.layers.len() != self.depth {
            return fail(format!("{} layers for depth {}", self.layers.len(), self.depth));
        }
        let reach = self.p << self.depth;
        if reach < self.n || (self.p << (self.depth - 1)) >= self.n {
            return fail(format!("depth {} does not bracket n = {}", self.depth, self.n));
        }
        let first: Vec<usize> = self.layers[0].blocks.iter().flat_map(|b| b.support.iter().copied()).collect();
        if first != (0..self.n).collect::<Vec<_>>() {
            return fail(format!("first layer does not partition 0..{}", self.n));
        }
        let mut register: Vec<usize> = (0..self.n).collect();
        for layer in &self.layers {
            let covered: Vec<usize> = layer.blocks.iter().flat_map(|b| b.support.iter().copied()).collect();
            if covered != register {
                return fail(format!("layer {} does not cover its register", layer.j));
            }
            for b in &layer.blocks {
                if b.support.is_empty() || b.register_offset + b.support.len() > register.len() {
                    return fail(format!("block ({}, {}) has a bad offset", layer.j, b.i));
                }
                if register[b.register_offset..b.register_offset + b.support.len()] != b.support[..] {
                    return fail(format!("block ({}, {}) is not contiguous in the register", layer.j, b.i));
                }
                if b.acted && b.carried[..] != b.support[b.support.len() - self.p..] {
                    return fail(format!("block ({}, {}) does not carry its last p sites", layer.j, b.i));
                }
                if b.projected + b.carried.len() != b.support.len() {
                    return fail(format!("block ({}, {}) loses sites", layer.j, b.i));
                }
            }
            register = layer.carried_register();
        }
        if register.len() != self.p {
            return fail(format!("{} sites survive instead of p = {}", register.len(), self.p));
        }
        if self.total_projected() != self.n - self.p {
            return fail(format!("{} sites projected instead of {}", self.total_projected(), self.n - self.p));
        }
        Ok(())
    }
}

/// `2 ceil(log_d D)`: twice the smallest `q` with `d^q >= D`.
pub fn p_exact(d: usize, bond: usize) -> usize {
    let mut q = 0;
    let mut acc = 1usize;
    while acc < bond {
        acc = acc.saturating_mul(d);
        q += 1;
    }
    2 * q
}

/// Smallest positive `M` with `2^M p >= n`.
pub fn depth_for(n: usize, p: usize) -> usize {
    let mut m = 1;
    while (p << m) < n {
        m += 1;
    }
    m
}

pub fn plan_layers(n: usize, d: usize, p: usize) -> Result<LayerPlan> {
    if p == 0 || n <= p {
        return Err(Error::TooSmall { n, p });
    }
    if d < 2 {
        return Err(Error::BadParameter(format!("local dimension {d} < 2")));
    }
    let depth = depth_for(n, p);
    let rest = n - (p << (depth - 1));
    let ell1 = rest.div_ceil(p);
    let mut s1 = rest % p;
    let s1_amended = s1 == 0;
    if s1_amended {
        s1 = p;
    }
    let k1 = 2 * ell1 * p - p + s1;
    let first_count = 1usize << (depth - 1);

    let mut blocks = Vec::with_capacity(first_count);
    for i in 1..=first_count {
        // one-based inclusive ranges, then shifted to zero-based labels
        let (lo, hi, projected) = if i < ell1 {
            (2 * (i - 1) * p + 1, 2 * i * p, p)
        } else if i == ell1 {
            (2 * (ell1 - 1) * p + 1, k1, s1)
        } else {
            (k1 + 1 + (i - ell1 - 1) * p, k1 + (i - ell1) * p, 0)
        };
        let support: Vec<usize> = (lo - 1..hi).collect();
        let carried = support[support.len() - p..].to_vec();
        blocks.push(BlockPlan { i, register_offset: lo - 1, support, carried, projected, acted: i <= ell1 });
    }
    let mut layers = alloc::vec![Layer { j: 1, blocks, register_len: n }];

    for j in 2..=depth {
        let prev = &layers[j - 2];
        let register_len = prev.carried_register().len();
        let pairs = prev.blocks.len() / 2;
        let blocks = (1..=pairs)
            .map(|i| {
                let mut support = prev.blocks[2 * i - 2].carried.clone();
                support.extend_from_slice(&prev.blocks[2 * i - 1].carried);
                let carried = support[support.len() - p..].to_vec();
                BlockPlan {
                    i,
                    register_offset: 2 * (i - 1) * p,
                    projected: support.len() - p,
                    support,
                    carried,
                    acted: true,
                }
            })
            .collect();
        layers.push(Layer { j, blocks, register_len });
    }

    let plan = LayerPlan { n, d, p, depth, ell1, s1, k1, s1_amended, layers };
    plan.check()?;
    Ok(plan)
}
