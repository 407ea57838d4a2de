use finsler::expr::{parse, symbols, Expr, ParseError};
use finsler_core::dual::{derivative, Scalar, D1};
use proptest::prelude::*;

fn xs(n: usize) -> Vec<String> {
    symbols("x", n)
}

fn eval(src: &str, x: &[f64]) -> f64 {
    parse(src, &xs(x.len())).unwrap().eval(x)
}

#[test]
fn precedence_and_associativity() {
    assert_eq!(eval("1 + 2 * 3", &[]), 7.0);
    assert_eq!(eval("(1 + 2) * 3", &[]), 9.0);
    assert_eq!(eval("8 / 4 / 2", &[]), 1.0);
    assert_eq!(eval("2 - 3 - 4", &[]), -5.0);
    assert_eq!(eval("-2^2", &[]), -4.0);
    assert_eq!(eval("2^3^2", &[]), 512.0);
    assert_eq!(eval("\u{2212}x1 * 2", &[1.5]), -3.0);
    assert_eq!(eval("1e-3 * 2E+2", &[]), 0.2);
}

#[test]
fn functions_and_symbols() {
    let x = [0.7, -1.3, 2.0];
    assert_eq!(eval("sin(x1)", &x), 0.7f64.sin());
    assert_eq!(eval("cos(x2) * x3", &x), (-1.3f64).cos() * 2.0);
    assert_eq!(eval("pow(x3, 0.5)", &x), 2.0f64.powf(0.5));
    assert_eq!(eval("pow(x2, 3)", &x), -1.3 * -1.3 * -1.3);
    assert!((eval("pow(x3, x1)", &x) - 2.0f64.powf(0.7)).abs() < 1e-15);
    assert_eq!(eval("sqrt(x3) + exp(0)", &x), 2.0f64.sqrt() + 1.0);
    assert_eq!(eval("pi", &[]), std::f64::consts::PI);
}

#[test]
fn wind_expression_matches_its_closed_form() {
    let e = parse("(sin(x1)^2 + 1) / 4", &xs(3)).unwrap();
    for x in [-2.0, -0.3, 0.0, 1.1, 2.9] {
        let s: f64 = f64::sin(x);
        assert_eq!(e.eval(&[x, 0.0, 0.0]), (s * s + 1.0) * 0.25);
        let d = derivative(|t: D1| e.eval(&[t, D1::zero(), D1::zero()]), x);
        assert!((d - 0.5 * s * f64::cos(x)).abs() < 1e-15);
    }
}

#[test]
fn errors_are_reported() {
    let n = xs(2);
    assert!(matches!(parse("x3", &n), Err(ParseError::UnknownSymbol(s)) if s == "x3"));
    assert!(matches!(parse("tan(x1)", &n), Err(ParseError::UnknownFunction(_))));
    assert!(matches!(parse("pow(x1)", &n), Err(ParseError::Arity { .. })));
    assert!(matches!(parse("sin(x1, x2)", &n), Err(ParseError::Arity { .. })));
    assert!(matches!(parse("1 +", &n), Err(ParseError::Eof)));
    assert!(matches!(parse("(1", &n), Err(ParseError::Eof)));
    assert!(matches!(parse("1 2", &n), Err(ParseError::Unexpected { .. })));
    assert!(matches!(parse("x1 $ 2", &n), Err(ParseError::BadChar { found: '$', .. })));
    assert!(matches!(parse("1e", &n), Err(ParseError::BadNumber(_))));
}

#[test]
fn constants_are_recognized() {
    let n = xs(2);
    assert_eq!(parse("2 * (3 - 1)", &n).unwrap().constant(), Some(4.0));
    assert_eq!(parse("0 * x1", &n).unwrap().constant(), None);
    assert_eq!(parse("x2", &n).unwrap().max_var(), Some(1));
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        any::<f64>().prop_filter("finite", |c| c.is_finite()).prop_map(Expr::Num),
        (0usize..3).prop_map(Expr::Var),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(a.into(), b.into())),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(a.into(), b.into())),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(a.into(), b.into())),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(a.into(), b.into())),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Pow(a.into(), b.into())),
        ]
    })
}

/// Trees the parser can produce: negated literals are folded.
fn canonical(e: Expr) -> Expr {
    match e {
        Expr::Neg(a) => match canonical(*a) {
            Expr::Num(c) => Expr::Num(-c),
            a => Expr::Neg(a.into()),
        },
        Expr::Add(a, b) => Expr::Add(canonical(*a).into(), canonical(*b).into()),
        Expr::Sub(a, b) => Expr::Sub(canonical(*a).into(), canonical(*b).into()),
        Expr::Mul(a, b) => Expr::Mul(canonical(*a).into(), canonical(*b).into()),
        Expr::Div(a, b) => Expr::Div(canonical(*a).into(), canonical(*b).into()),
        Expr::Pow(a, b) => Expr::Pow(canonical(*a).into(), canonical(*b).into()),
        e => e,
    }
}

fn bits(e: &Expr, out: &mut Vec<u64>) {
    match e {
        Expr::Num(c) => out.push(c.to_bits()),
        Expr::Var(_) => {}
        Expr::Neg(a) | Expr::Call(_, a) => bits(a, out),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
            bits(a, out);
            bits(b, out);
        }
    }
}

proptest! {
    #[test]
    fn numeric_literals_round_trip_bit_exactly(c in any::<f64>().prop_filter("finite", |c| c.is_finite())) {
        let names = xs(1);
        let e = Expr::Num(c);
        let text = e.display(&names).to_string();
        let back = parse(&text, &names).unwrap();
        prop_assert_eq!(back.constant().unwrap().to_bits(), c.to_bits());
        let plain = parse(&format!("{c:?}"), &names).unwrap();
        prop_assert_eq!(plain.constant().unwrap().to_bits(), c.to_bits());
    }

    #[test]
    fn rendered_trees_parse_back_identically(e in arb_expr()) {
        let names = xs(3);
        let e = canonical(e);
        let text = e.display(&names).to_string();
        let back = parse(&text, &names).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        bits(&e, &mut a);
        bits(&back, &mut b);
        prop_assert_eq!(a, b);
        prop_assert_eq!(back, e);
    }
}
