use serde::{Deserialize, Serialize};
use std::fmt;

use super::DiscretizationError;

/// Number of spatial dimensions plus time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dims {
    #[serde(rename = "1+1")]
    D1,
    #[serde(rename = "2+1")]
    D2,
}

impl Dims {
    /// Nodes per element.
    pub fn nodes_per_element(self) -> usize {
        match self {
            Dims::D1 => 4,
            Dims::D2 => 8,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Dims::D1 => "1+1",
            Dims::D2 => "2+1",
        }
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Dims {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "1+1" | "1" => Ok(Dims::D1),
            "2+1" | "2" => Ok(Dims::D2),
            other => Err(format!("unknown dimension `{other}`, expected 1+1 or 2+1")),
        }
    }
}

/// Structured spacetime slab, periodic in space, open in time.
///
/// Nodes are numbered time-major: `it * (nx * ny) + iy * nx + ix`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub dims: Dims,
    pub nx: usize,
    /// Ignored (treated as 1) in 1+1.
    pub ny: usize,
    pub nt: usize,
    pub length: f64,
    pub t_slab: f64,
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec { dims: Dims::D1, nx: 100, ny: 100, nt: 101, length: 1.0, t_slab: 1.0 }
    }
}

impl MeshSpec {
    pub fn new_1d(nx: usize, nt: usize, length: f64, t_slab: f64) -> Self {
        MeshSpec { dims: Dims::D1, nx, ny: 1, nt, length, t_slab }
    }

    pub fn new_2d(nx: usize, ny: usize, nt: usize, length: f64, t_slab: f64) -> Self {
        MeshSpec { dims: Dims::D2, nx, ny, nt, length, t_slab }
    }

    pub fn validate(&self) -> Result<(), DiscretizationError> {
        let bad = |m: String| Err(DiscretizationError::InvalidMesh(m));
        if self.nx < 3 {
            return bad(format!("nx >= 3 required, got {}", self.nx));
        }
        if self.dims == Dims::D2 && self.ny < 3 {
            return bad(format!("ny >= 3 required, got {}", self.ny));
        }
        if self.nt < 2 {
            return bad(format!("nt >= 2 required, got {}", self.nt));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return bad(format!("L > 0 required, got {}", self.length));
        }
        if !(self.t_slab > 0.0 && self.t_slab.is_finite()) {
            return bad(format!("T_slab > 0 required, got {}", self.t_slab));
        }
        Ok(())
    }

    /// Effective `ny`: 1 in 1+1.
    #[inline]
    pub fn ny_eff(&self) -> usize {
        match self.dims {
            Dims::D1 => 1,
            Dims::D2 => self.ny,
        }
    }

    #[inline]
    pub fn h_x(&self) -> f64 {
        self.length / self.nx as f64
    }

    #[inline]
    pub fn h_y(&self) -> f64 {
        self.length / self.ny_eff() as f64
    }

    #[inline]
    pub fn h_t(&self) -> f64 {
        self.t_slab / (self.nt - 1) as f64
    }

    /// Spatial cell volume `h_x` or `h_x h_y`.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        match self.dims {
            Dims::D1 => self.h_x(),
            Dims::D2 => self.h_x() * self.h_y(),
        }
    }

    #[inline]
    pub fn nodes_per_level(&self) -> usize {
        self.nx * self.ny_eff()
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.nodes_per_level() * self.nt
    }

    #[inline]
    pub fn ndof(&self) -> usize {
        4 * self.num_nodes()
    }

    #[inline]
    pub fn num_elements(&self) -> usize {
        self.nodes_per_level() * (self.nt - 1)
    }

    /// Flat node index; spatial indices wrap, the time index must be in range.
    pub fn node_index(&self, ix: i64, iy: i64, it: usize) -> Result<usize, DiscretizationError> {
        if it >= self.nt {
            return Err(DiscretizationError::TimeIndexOutOfRange { it, nt: self.nt });
        }
        let ix = ix.rem_euclid(self.nx as i64) as usize;
        let iy = iy.rem_euclid(self.ny_eff() as i64) as usize;
        Ok(self.node_unchecked(ix, iy, it))
    }

    #[inline]
    pub(crate) fn node_unchecked(&self, ix: usize, iy: usize, it: usize) -> usize {
        it * self.nodes_per_level() + iy * self.nx + ix
    }

    /// Inverse of [`MeshSpec::node_index`] for in-range nodes: `(ix, iy, it)`.
    #[inline]
    pub fn node_coords(&self, node: usize) -> (usize, usize, usize) {
        let npl = self.nodes_per_level();
        let it = node / npl;
        let r = node % npl;
        (r % self.nx, r / self.nx, it)
    }

    /// Global nodes of element `e` in local basis order.
    ///
    /// Local node `k` (0-based) sits at `xi = (k%4 == 1 || k%4 == 2)`,
    /// `tau = (k%4 >= 2)`, `zeta = (k >= 4)`.
    #[inline]
    pub fn element_nodes(&self, e: usize) -> [usize; 8] {
        let npl = self.nodes_per_level();
        let it = e / npl;
        let r = e % npl;
        let ix = r % self.nx;
        let iy = r / self.nx;
        let ix1 = (ix + 1) % self.nx;
        let base = [
            self.node_unchecked(ix, iy, it),
            self.node_unchecked(ix1, iy, it),
            self.node_unchecked(ix1, iy, it + 1),
            self.node_unchecked(ix, iy, it + 1),
        ];
        match self.dims {
            Dims::D1 => [base[0], base[1], base[2], base[3], 0, 0, 0, 0],
            Dims::D2 => {
                let iy1 = (iy + 1) % self.ny;
                [
                    base[0],
                    base[1],
                    base[2],
                    base[3],
                    self.node_unchecked(ix, iy1, it),
                    self.node_unchecked(ix1, iy1, it),
                    self.node_unchecked(ix1, iy1, it + 1),
                    self.node_unchecked(ix, iy1, it + 1),
                ]
            }
        }
    }

    /// Lower-left-early corner of element `e` as `(x, y, t)` within the slab.
    #[inline]
    pub fn element_origin(&self, e: usize) -> (f64, f64, f64) {
        let (ix, iy, it) = self.node_coords(e);
        (ix as f64 * self.h_x(), iy as f64 * self.h_y(), it as f64 * self.h_t())
    }

    /// Spatial coordinate of node `(ix, iy)`.
    #[inline]
    pub fn x(&self, ix: usize) -> f64 {
        ix as f64 * self.h_x()
    }

    #[inline]
    pub fn y(&self, iy: usize) -> f64 {
        iy as f64 * self.h_y()
    }

    /// Time of level `it` relative to the slab start.
    #[inline]
    pub fn t(&self, it: usize) -> f64 {
        it as f64 * self.h_t()
    }

    pub fn label(&self) -> String {
        match self.dims {
            Dims::D1 => format!("{}x{}", self.nx, self.nt),
            Dims::D2 => format!("{}x{}x{}", self.nx, self.ny, self.nt),
        }
    }
}
