use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Search window deciding which pixel pairs get a nonzero weight.
///
/// Offsets are relative to the center pixel as `(dx, dy)`. Every kind is
/// symmetric under `d -> -d`, so the resulting weight matrix is symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WindowSpec {
    /// `max(|dx|, |dy|) < dist`; `dist = 8` is the usual 15x15 window.
    Box { dist: usize },
    /// A central `block x block` square plus eight equal squares centered
    /// at `(+-spacing, 0)`, `(0, +-spacing)` and `(+-spacing, +-spacing)`.
    SparseNine { block: usize, spacing: usize },
    /// A central `center x center` square plus, in each of the eight axial
    /// and diagonal directions, one `small x small` square per radius.
    SparseScatter {
        center: usize,
        small: usize,
        radii: Vec<usize>,
    },
}

#[derive(Debug, Clone, Copy)]
struct Block {
    cx: isize,
    cy: isize,
    half: isize,
}

impl Block {
    fn contains(&self, dx: isize, dy: isize) -> bool {
        (dx - self.cx).abs() <= self.half && (dy - self.cy).abs() <= self.half
    }
}

const DIRECTIONS: [(isize, isize); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

impl WindowSpec {
    /// Square window of odd side `size` (15 gives `dist = 8`).
    pub fn square(size: usize) -> Result<Self> {
        if size == 0 || size % 2 == 0 {
            return Err(Error::InvalidParameter(format!("box window side must be odd, got {size}")));
        }
        Ok(WindowSpec::Box { dist: size.div_ceil(2) })
    }

    pub fn default_sparse_nine() -> Self {
        WindowSpec::SparseNine {
            block: 15,
            spacing: 40,
        }
    }

    pub fn default_sparse_scatter() -> Self {
        WindowSpec::SparseScatter {
            center: 15,
            small: 5,
            radii: vec![25, 45, 65],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let odd = |s: usize, what: &str| {
            if s == 0 || s % 2 == 0 {
                Err(Error::InvalidParameter(format!("{what} size must be odd and positive, got {s}")))
            } else {
                Ok(())
            }
        };
        match self {
            WindowSpec::Box { dist } => {
                if *dist == 0 {
                    return Err(Error::InvalidParameter("box dist must be >= 1".into()));
                }
            }
            WindowSpec::SparseNine { block, .. } => odd(*block, "block")?,
            WindowSpec::SparseScatter { center, small, .. } => {
                odd(*center, "center block")?;
                odd(*small, "small block")?;
            }
        }
        Ok(())
    }

    fn blocks(&self) -> Vec<Block> {
        let half = |s: usize| (s as isize - 1) / 2;
        match self {
            WindowSpec::Box { dist } => vec![Block {
                cx: 0,
                cy: 0,
                half: *dist as isize - 1,
            }],
            WindowSpec::SparseNine { block, spacing } => {
                let h = half(*block);
                let s = *spacing as isize;
                std::iter::once(Block { cx: 0, cy: 0, half: h })
                    .chain(DIRECTIONS.iter().map(|&(x, y)| Block {
                        cx: x * s,
                        cy: y * s,
                        half: h,
                    }))
                    .collect()
            }
            WindowSpec::SparseScatter { center, small, radii } => {
                let mut v = vec![Block {
                    cx: 0,
                    cy: 0,
                    half: half(*center),
                }];
                for &r in radii {
                    for &(x, y) in &DIRECTIONS {
                        v.push(Block {
                            cx: x * r as isize,
                            cy: y * r as isize,
                            half: half(*small),
                        });
                    }
                }
                v
            }
        }
    }

    /// Whether relative offset `(dx, dy)` lies inside the window.
    pub fn contains(&self, dx: isize, dy: isize) -> bool {
        self.blocks().iter().any(|b| b.contains(dx, dy))
    }

    /// All nonzero offsets `(dx, dy)` in the window, sorted by `(dy, dx)` so
    /// that in-bounds targets come out in increasing row-major pixel order.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        let mut out = Vec::new();
        for b in self.blocks() {
            for dy in (b.cy - b.half)..=(b.cy + b.half) {
                for dx in (b.cx - b.half)..=(b.cx + b.half) {
                    if dx != 0 || dy != 0 {
                        out.push((dx, dy));
                    }
                }
            }
        }
        out.sort_unstable_by_key(|&(dx, dy)| (dy, dx));
        out.dedup();
        out
    }
}

/// Proximity indicator between pixels `p_i = (x_i, y_i)` and `p_j`.
pub fn proximity_image(p_i: (usize, usize), p_j: (usize, usize), window: &WindowSpec) -> bool {
    let dx = p_j.0 as isize - p_i.0 as isize;
    let dy = p_j.1 as isize - p_i.1 as isize;
    (dx == 0 && dy == 0) || window.contains(dx, dy)
}
