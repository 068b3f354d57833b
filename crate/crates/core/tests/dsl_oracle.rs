//! Symbolic derivatives checked against hyper-dual evaluation and finite
//! differences; printing and differentiation properties.

use mixfrac::lagrange_dsl::{differentiate, evaluate, parse, BinaryOp, Expr, Lagrangian, UnaryOp, Var};
use mixfrac::special::erfc;
use proptest::prelude::*;

/// Hyper-dual number `a + b·e1 + c·e2 + d·e1e2` with `e1² = e2² = 0`.
#[derive(Debug, Clone, Copy)]
struct HD {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl HD {
    fn cst(a: f64) -> Self {
        HD {
            a,
            b: 0.0,
            c: 0.0,
            d: 0.0,
        }
    }

    /// `f(x)` given `f(a)`, `f'(a)`, `f''(a)`.
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        HD {
            a: f0,
            b: f1 * self.b,
            c: f1 * self.c,
            d: f1 * self.d + f2 * self.b * self.c,
        }
    }

    fn add(self, o: Self) -> Self {
        HD {
            a: self.a + o.a,
            b: self.b + o.b,
            c: self.c + o.c,
            d: self.d + o.d,
        }
    }

    fn sub(self, o: Self) -> Self {
        HD {
            a: self.a - o.a,
            b: self.b - o.b,
            c: self.c - o.c,
            d: self.d - o.d,
        }
    }

    fn mul(self, o: Self) -> Self {
        HD {
            a: self.a * o.a,
            b: self.a * o.b + self.b * o.a,
            c: self.a * o.c + self.c * o.a,
            d: self.a * o.d + self.b * o.c + self.c * o.b + self.d * o.a,
        }
    }

    fn recip(self) -> Self {
        let x = self.a;
        self.chain(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }

    fn ln(self) -> Self {
        let x = self.a;
        self.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
    }

    fn exp(self) -> Self {
        let e = self.a.exp();
        self.chain(e, e, e)
    }
}

fn hd_eval(e: &Expr, t: HD, y: HD, v: HD) -> HD {
    match e {
        Expr::Const(c) => HD::cst(*c),
        Expr::Var(Var::T) => t,
        Expr::Var(Var::Y) => y,
        Expr::Var(Var::V) => v,
        Expr::Unary(op, x) => {
            let u = hd_eval(x, t, y, v);
            let a = u.a;
            match op {
                UnaryOp::Neg => HD::cst(0.0).sub(u),
                UnaryOp::Exp => u.exp(),
                UnaryOp::Log => u.ln(),
                UnaryOp::Sqrt => u.chain(a.sqrt(), 0.5 / a.sqrt(), -0.25 / (a * a.sqrt())),
                UnaryOp::Sin => u.chain(a.sin(), a.cos(), -a.sin()),
                UnaryOp::Cos => u.chain(a.cos(), -a.sin(), -a.cos()),
                UnaryOp::Erfc => {
                    let g = -2.0 / std::f64::consts::PI.sqrt() * (-a * a).exp();
                    u.chain(erfc(a), g, -2.0 * a * g)
                }
            }
        }
        Expr::Binary(op, l, r) => {
            let p = hd_eval(l, t, y, v);
            let q = hd_eval(r, t, y, v);
            match op {
                BinaryOp::Add => p.add(q),
                BinaryOp::Sub => p.sub(q),
                BinaryOp::Mul => p.mul(q),
                BinaryOp::Div => p.mul(q.recip()),
                BinaryOp::Pow => {
                    if let Expr::Const(c) = **r {
                        let x = p.a;
                        p.chain(x.powf(c), c * x.powf(c - 1.0), c * (c - 1.0) * x.powf(c - 2.0))
                    } else {
                        p.ln().mul(q).exp()
                    }
                }
            }
        }
    }
}

const CORPUS: &[&str] = &[
    "v^2",
    "v^2 - 2*v",
    "exp(y*v)",
    "v^2*(1 + y^2) + sin(t)*v",
    "sqrt(1 + v^2) + 0.5*y^4",
    "log(2 + y^2) * cos(v) - t*y",
    "erfc(v) + y/(1 + v^2)",
    "(1 + y^2)^(0.5 + 0.1*v)",
    "-v^3/3 + y*v - exp(-t)*y^2",
];

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn rng_points(seed: u64, count: usize) -> Vec<(f64, f64, f64)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (
                rng.random_range(0.0..1.0),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
            )
        })
        .collect()
}

#[test]
fn symbolic_partials_match_hyper_dual() {
    for src in CORPUS {
        let l = Lagrangian::parse(src).unwrap();
        for (t, y, v) in rng_points(7, 100) {
            let seeds = [(Var::Y, Var::Y), (Var::Y, Var::V), (Var::V, Var::V)];
            let second = [&l.d22, &l.d23, &l.d33];
            for ((p, q), sym2) in seeds.iter().zip(second) {
                let mk = |var: Var, val: f64| HD {
                    a: val,
                    b: if *p == var { 1.0 } else { 0.0 },
                    c: if *q == var { 1.0 } else { 0.0 },
                    d: 0.0,
                };
                let r = hd_eval(&l.f, HD::cst(t), mk(Var::Y, y), mk(Var::V, v));
                let first = if *p == Var::Y { &l.d2 } else { &l.d3 };
                let s1 = evaluate(first, t, y, v).unwrap();
                let s2 = evaluate(sym2, t, y, v).unwrap();
                assert!(close(s1, r.b, 1e-10), "{src} d1 at ({t},{y},{v}): {s1} vs {}", r.b);
                assert!(close(s2, r.d, 1e-10), "{src} d2 at ({t},{y},{v}): {s2} vs {}", r.d);
            }
        }
    }
}

#[test]
fn symbolic_partials_match_finite_differences() {
    for src in CORPUS {
        let e = parse(src).unwrap();
        for var in [Var::Y, Var::V] {
            let d = differentiate(&e, var);
            for (t, y, v) in rng_points(11, 100) {
                let x = if var == Var::Y { y } else { v };
                let step = 1e-5 * x.abs().max(1.0);
                let at = |dx: f64| match var {
                    Var::Y => evaluate(&e, t, y + dx, v).unwrap(),
                    _ => evaluate(&e, t, y, v + dx).unwrap(),
                };
                let fd = (at(step) - at(-step)) / (2.0 * step);
                let sym = evaluate(&d, t, y, v).unwrap();
                assert!(close(sym, fd, 1e-6), "{src} d/d{var:?}: {sym} vs {fd}");
            }
        }
    }
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-50.0f64..50.0).prop_map(Expr::Const),
        prop_oneof![Just(Var::T), Just(Var::Y), Just(Var::V)].prop_map(Expr::Var),
    ];
    leaf.prop_recursive(5, 40, 2, |inner| {
        let unary = prop_oneof![
            Just(UnaryOp::Neg),
            Just(UnaryOp::Exp),
            Just(UnaryOp::Log),
            Just(UnaryOp::Sqrt),
            Just(UnaryOp::Sin),
            Just(UnaryOp::Cos),
            Just(UnaryOp::Erfc),
        ];
        let binary = prop_oneof![
            Just(BinaryOp::Add),
            Just(BinaryOp::Sub),
            Just(BinaryOp::Mul),
            Just(BinaryOp::Div),
            Just(BinaryOp::Pow),
        ];
        prop_oneof![
            (unary, inner.clone()).prop_map(|(op, x)| Expr::Unary(op, Box::new(x))),
            (binary, inner.clone(), inner).prop_map(|(op, l, r)| Expr::Binary(op, Box::new(l), Box::new(r))),
        ]
    })
}

/// Expressions defined everywhere, for linearity checks.
fn arb_smooth() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-3.0f64..3.0).prop_map(Expr::Const),
        prop_oneof![Just(Var::T), Just(Var::Y), Just(Var::V)].prop_map(Expr::Var),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        let unary = prop_oneof![
            Just(UnaryOp::Neg),
            Just(UnaryOp::Sin),
            Just(UnaryOp::Cos),
            Just(UnaryOp::Erfc)
        ];
        let binary = prop_oneof![Just(BinaryOp::Add), Just(BinaryOp::Sub), Just(BinaryOp::Mul)];
        prop_oneof![
            (unary, inner.clone()).prop_map(|(op, x)| Expr::Unary(op, Box::new(x))),
            (binary, inner.clone(), inner).prop_map(|(op, l, r)| Expr::Binary(op, Box::new(l), Box::new(r))),
        ]
    })
}

proptest! {
    #[test]
    fn print_parse_round_trip(e in arb_expr()) {
        let printed = e.to_string();
        prop_assert_eq!(parse(&printed).unwrap(), e);
    }

    #[test]
    fn differentiation_is_linear(
        e1 in arb_smooth(),
        e2 in arb_smooth(),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        t in 0.0f64..1.0,
        y in -1.0f64..1.0,
        v in -1.0f64..1.0,
    ) {
        let combo = Expr::Binary(
            BinaryOp::Add,
            Box::new(Expr::Binary(BinaryOp::Mul, Box::new(Expr::Const(a)), Box::new(e1.clone()))),
            Box::new(Expr::Binary(BinaryOp::Mul, Box::new(Expr::Const(b)), Box::new(e2.clone()))),
        );
        for var in [Var::Y, Var::V] {
            let lhs = evaluate(&differentiate(&combo, var), t, y, v).unwrap();
            let d1 = evaluate(&differentiate(&e1, var), t, y, v).unwrap();
            let d2 = evaluate(&differentiate(&e2, var), t, y, v).unwrap();
            let rhs = a * d1 + b * d2;
            let scale = (a * d1).abs() + (b * d2).abs() + 1.0;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale, "{} vs {}", lhs, rhs);
        }
    }

    #[test]
    fn evaluation_never_returns_non_finite(e in arb_expr(), t in 0.0f64..1.0, y in -2.0f64..2.0, v in -2.0f64..2.0) {
        if let Ok(x) = evaluate(&e, t, y, v) {
            prop_assert!(x.is_finite());
        }
    }
}
