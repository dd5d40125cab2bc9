//! Canonical form: one tree per equivalence class reachable by the rules
//! below, applied innermost-first.
//!
//! - `MACD(S,f,s,g)` expands to `MAVG(MSUB(MAVG(S,f),MAVG(S,s)),g)`.
//! - `SCALE` is pushed inward through the linear operators `MAVG`, `EMA`,
//!   `MOM` and `MSUB` (distributing over both operands).
//! - Nested `SCALE`s merge by multiplying factors; `SCALE(S,1)` is `S`.
//! - Arguments of commutative joins are sorted by their serialization.
//!
//! `SEL`, `PROJ`, `WIN`, `UNION`, `INTERSECT` and joins are barriers: no
//! scale crosses them.

use alloc::boxed::Box;
use alloc::string::ToString;
use alloc::vec::Vec;

use super::Expr;

pub fn canonicalize(expr: &Expr) -> Expr {
    match expr {
        Expr::Base(name) => Expr::Base(name.clone()),
        Expr::Macd(s, p) => {
            let s = canonicalize(s);
            let diff = s.clone().mavg(p.fast).msub(s.mavg(p.slow));
            canonicalize(&diff.mavg(p.signal))
        }
        Expr::Scale(s, k) => push_scale(canonicalize(s), *k),
        Expr::Mavg(s, w) => Expr::Mavg(bx(s), *w),
        Expr::Ema(s, a, w) => Expr::Ema(bx(s), *a, *w),
        Expr::Mom(s, w) => Expr::Mom(bx(s), *w),
        Expr::Msub(a, b) => Expr::Msub(bx(a), bx(b)),
        Expr::Sel(s, p) => Expr::Sel(bx(s), *p),
        Expr::Proj(s, f) => Expr::Proj(bx(s), *f),
        Expr::Win(s, w, f) => Expr::Win(bx(s), *w, *f),
        Expr::Union(a, b) => Expr::Union(bx(a), bx(b)),
        Expr::Intersect(a, b) => Expr::Intersect(bx(a), bx(b)),
        Expr::Join(args, fun) => {
            let mut args: Vec<Expr> = args.iter().map(canonicalize).collect();
            if fun.is_commutative() {
                let mut keyed: Vec<_> = args.into_iter().map(|a| (a.to_string(), a)).collect();
                keyed.sort_by(|x, y| x.0.cmp(&y.0));
                args = keyed.into_iter().map(|(_, a)| a).collect();
            }
            Expr::Join(args, *fun)
        }
    }
}

fn bx(e: &Expr) -> Box<Expr> {
    Box::new(canonicalize(e))
}

/// Applies `SCALE(_, k)` to an already canonical tree.
fn push_scale(e: Expr, k: f64) -> Expr {
    if k == 1.0 {
        return e;
    }
    match e {
        Expr::Mavg(s, w) => Expr::Mavg(Box::new(push_scale(*s, k)), w),
        Expr::Ema(s, a, w) => Expr::Ema(Box::new(push_scale(*s, k)), a, w),
        Expr::Mom(s, w) => Expr::Mom(Box::new(push_scale(*s, k)), w),
        Expr::Msub(a, b) => Expr::Msub(Box::new(push_scale(*a, k)), Box::new(push_scale(*b, k))),
        Expr::Scale(s, k0) => push_scale(*s, k0 * k),
        other => Expr::Scale(Box::new(other), k),
    }
}
