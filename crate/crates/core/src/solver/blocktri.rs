//! Block-tridiagonal solver with 4x4 complex blocks (block Thomas algorithm).

use num_complex::Complex64;

pub const BS: usize = 4;
pub type Block = [[Complex64; BS]; BS];

pub fn zero_block() -> Block {
    [[Complex64::new(0.0, 0.0); BS]; BS]
}

pub fn identity_block() -> Block {
    let mut b = zero_block();
    for (r, row) in b.iter_mut().enumerate() {
        row[r] = Complex64::new(1.0, 0.0);
    }
    b
}

fn mat_mul(a: &Block, b: &Block) -> Block {
    let mut out = zero_block();
    for r in 0..BS {
        for k in 0..BS {
            let ark = a[r][k];
            if ark.re == 0.0 && ark.im == 0.0 {
                continue;
            }
            for c in 0..BS {
                out[r][c] += ark * b[k][c];
            }
        }
    }
    out
}

fn mat_sub_assign(a: &mut Block, b: &Block) {
    for r in 0..BS {
        for c in 0..BS {
            a[r][c] -= b[r][c];
        }
    }
}

fn mat_vec(a: &Block, x: &[Complex64; BS]) -> [Complex64; BS] {
    let mut out = [Complex64::new(0.0, 0.0); BS];
    for r in 0..BS {
        let mut s = Complex64::new(0.0, 0.0);
        for c in 0..BS {
            s += a[r][c] * x[c];
        }
        out[r] = s;
    }
    out
}

/// Inverts a 4x4 complex block by Gauss-Jordan with partial pivoting.
fn invert(block: &Block) -> Option<Block> {
    let mut m = *block;
    let mut inv = identity_block();
    for col in 0..BS {
        let piv = (col..BS).max_by(|&p, &q| m[p][col].norm_sqr().total_cmp(&m[q][col].norm_sqr()))?;
        if m[piv][col].norm_sqr() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        inv.swap(col, piv);
        let d = m[col][col];
        for c in 0..BS {
            m[col][c] /= d;
            inv[col][c] /= d;
        }
        for r in 0..BS {
            if r == col {
                continue;
            }
            let f = m[r][col];
            if f.re == 0.0 && f.im == 0.0 {
                continue;
            }
            for c in 0..BS {
                let mc = m[col][c];
                let ic = inv[col][c];
                m[r][c] -= f * mc;
                inv[r][c] -= f * ic;
            }
        }
    }
    Some(inv)
}

/// Tridiagonal block matrix: row j reads A[j] X[j-1] + B[j] X[j] + C[j] X[j+1].
pub struct BlockTriMatrix {
    pub n: usize,
    pub a: Vec<Block>,
    pub b: Vec<Block>,
    pub c: Vec<Block>,
}

impl BlockTriMatrix {
    pub fn zeros(n: usize) -> Self {
        BlockTriMatrix {
            n,
            a: vec![zero_block(); n],
            b: vec![zero_block(); n],
            c: vec![zero_block(); n],
        }
    }
}

/// Factored form: per-row inverse of the eliminated diagonal plus the
/// original sub/super blocks.
pub struct BlockTriLu {
    n: usize,
    binv: Vec<Block>,
    a: Vec<Block>,
    c: Vec<Block>,
}

impl BlockTriLu {
    /// Factors the matrix; returns the first singular node on failure.
    pub fn factor(m: &BlockTriMatrix) -> Result<BlockTriLu, usize> {
        let n = m.n;
        let mut binv = Vec::with_capacity(n);
        let mut btilde = m.b[0];
        binv.push(invert(&btilde).ok_or(0usize)?);
        for j in 1..n {
            // B~_j = B_j - A_j inv(B~_{j-1}) C_{j-1}
            let w = mat_mul(&binv[j - 1], &m.c[j - 1]);
            btilde = m.b[j];
            mat_sub_assign(&mut btilde, &mat_mul(&m.a[j], &w));
            binv.push(invert(&btilde).ok_or(j)?);
        }
        Ok(BlockTriLu {
            n,
            binv,
            a: m.a.clone(),
            c: m.c.clone(),
        })
    }

    /// Solves in place; `rhs` holds n consecutive 4-vectors.
    pub fn solve(&self, rhs: &mut [Complex64]) {
        debug_assert_eq!(rhs.len(), self.n * BS);
        // Forward sweep: y_j = inv(B~_j) (r_j - A_j y_{j-1}).
        let mut y = vec![[Complex64::new(0.0, 0.0); BS]; self.n];
        let mut r0 = [Complex64::new(0.0, 0.0); BS];
        r0.copy_from_slice(&rhs[0..BS]);
        y[0] = mat_vec(&self.binv[0], &r0);
        for j in 1..self.n {
            let mut r = [Complex64::new(0.0, 0.0); BS];
            r.copy_from_slice(&rhs[j * BS..(j + 1) * BS]);
            let ay = mat_vec(&self.a[j], &y[j - 1]);
            for k in 0..BS {
                r[k] -= ay[k];
            }
            y[j] = mat_vec(&self.binv[j], &r);
        }
        // Back substitution: x_j = y_j - inv(B~_j) C_j x_{j+1}.
        rhs[(self.n - 1) * BS..].copy_from_slice(&y[self.n - 1]);
        for j in (0..self.n - 1).rev() {
            let mut xnext = [Complex64::new(0.0, 0.0); BS];
            xnext.copy_from_slice(&rhs[(j + 1) * BS..(j + 2) * BS]);
            let cx = mat_vec(&self.c[j], &xnext);
            let corr = mat_vec(&self.binv[j], &cx);
            for k in 0..BS {
                rhs[j * BS + k] = y[j][k] - corr[k];
            }
        }
    }
}
