//! Finite-difference weights on a uniform segment grid.

/// Weights `c[d][i]` such that `f^(d)(x0) ≈ Σ_i c[d][i] f(nodes[i])`
/// (Fornberg's recursion, arbitrary node placement).
pub fn fornberg_weights(x0: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    if n == 0 {
        return c;
    }
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Derivative stencil at one node, for unit node spacing.
#[derive(Clone, Debug)]
pub(crate) struct NodeStencil {
    pub start: usize,
    /// `weights[d][i]` for derivative order `d = 0..=4`.
    pub weights: Vec<Vec<f64>>,
}

impl NodeStencil {
    pub fn contains(&self, node: usize) -> bool {
        node >= self.start && node < self.start + self.weights[0].len()
    }
}

/// Stencils of width `min(9, m)` for every node of an `m`-node segment;
/// central where the window fits, one-sided near the ends.
#[derive(Clone, Debug)]
pub(crate) struct SegmentStencils {
    pub width: usize,
    pub nodes: Vec<NodeStencil>,
}

pub(crate) const MAX_WIDTH: usize = 9;

fn window_start(pos: usize, width: usize, m: usize) -> usize {
    pos.saturating_sub(width / 2).min(m - width)
}

impl SegmentStencils {
    pub fn new(m: usize) -> Self {
        let width = MAX_WIDTH.min(m);
        let nodes = (0..m)
            .map(|j| {
                let start = window_start(j, width, m);
                let grid: Vec<f64> = (start..start + width).map(|i| i as f64).collect();
                NodeStencil {
                    start,
                    weights: fornberg_weights(j as f64, &grid, 4),
                }
            })
            .collect();
        Self { width, nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Interpolation weights at fractional node position `pos`.
    pub fn interpolation(&self, pos: f64) -> (usize, Vec<f64>) {
        let m = self.len();
        let centre = pos.round().clamp(0.0, (m - 1) as f64) as usize;
        let start = window_start(centre, self.width, m);
        let grid: Vec<f64> = (start..start + self.width).map(|i| i as f64).collect();
        let w = fornberg_weights(pos, &grid, 0).swap_remove(0);
        (start, w)
    }
}
