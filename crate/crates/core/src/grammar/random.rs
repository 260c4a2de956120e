//! Random well-formed expressions, used for property tests and exploration.

use rand::Rng;

use super::{BinaryOp, Budget, CsOp, FactorExpr, Primitive, UnaryOp, WindowOp};

const WINDOWS: [u32; 6] = [1, 2, 3, 5, 10, 20];
const CONSTANTS: [f64; 4] = [-1.0, 0.5, 1.0, 2.0];

/// Draws an expression that passes [`FactorExpr::validate_no_lookahead`] under `budget`.
pub fn random_expr<R: Rng + ?Sized>(rng: &mut R, budget: &Budget) -> FactorExpr {
    loop {
        let e = grow(rng, budget.max_depth.max(1));
        if e.validate_no_lookahead(budget).is_ok() {
            return e;
        }
    }
}

fn grow<R: Rng + ?Sized>(rng: &mut R, depth_left: usize) -> FactorExpr {
    let leaf_p = if depth_left <= 1 { 1.0 } else { 0.3 };
    if rng.random_bool(leaf_p) {
        return if rng.random_bool(0.1) {
            FactorExpr::Const(CONSTANTS[rng.random_range(0..CONSTANTS.len())])
        } else {
            FactorExpr::Primitive(Primitive::ALL[rng.random_range(0..Primitive::ALL.len())])
        };
    }
    let next = depth_left - 1;
    match rng.random_range(0..4) {
        0 => {
            let op = [UnaryOp::Neg, UnaryOp::Abs, UnaryOp::Log1p, UnaryOp::Sign][rng.random_range(0..4)];
            FactorExpr::unary(op, grow(rng, next))
        }
        1 => {
            let op = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div]
                [rng.random_range(0..4)];
            FactorExpr::binary(op, grow(rng, next), grow(rng, next))
        }
        2 => {
            let op = [
                WindowOp::Lag,
                WindowOp::RollingMean,
                WindowOp::RollingStd,
                WindowOp::RollingSum,
                WindowOp::RollingMax,
                WindowOp::RollingMin,
                WindowOp::Delta,
            ][rng.random_range(0..7)];
            let w = WINDOWS[rng.random_range(0..WINDOWS.len())];
            FactorExpr::window(op, grow(rng, next), w)
        }
        _ => {
            let op = if rng.random_bool(0.5) {
                CsOp::Rank
            } else {
                CsOp::ZScore
            };
            FactorExpr::cs(op, grow(rng, next))
        }
    }
}
