//! Canonical printer. Output parses back to the same tree for every tree
//! produced by the parser.

use std::fmt::{self, Display, Formatter, Write};

use num_complex::Complex64;

use super::Node;

const ATOM: u8 = 5;

fn precedence(node: &Node) -> u8 {
    match node {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(_) => 3,
        Node::Pow(..) => 4,
        Node::Const(z) if !is_plain(*z) => 1,
        _ => ATOM,
    }
}

/// Constants that print as a single number token or `i`.
fn is_plain(z: Complex64) -> bool {
    (z.im == 0.0 && z.re.is_sign_positive()) || (z.re == 0.0 && z.im == 1.0)
}

fn write_const(f: &mut Formatter<'_>, z: Complex64) -> fmt::Result {
    if z.im == 0.0 {
        if z.re.is_sign_positive() {
            write!(f, "{:?}", z.re)
        } else {
            write!(f, "-{:?}", -z.re)
        }
    } else if z.re == 0.0 && z.im == 1.0 {
        f.write_char('i')
    } else if z.re == 0.0 {
        write!(f, "{:?}*i", z.im)
    } else {
        write!(f, "{:?}+{:?}*i", z.re, z.im)
    }
}

fn child(f: &mut Formatter<'_>, node: &Node, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({node})")
    } else {
        write!(f, "{node}")
    }
}

fn binary(f: &mut Formatter<'_>, op: char, prec: u8, a: &Node, b: &Node) -> fmt::Result {
    child(f, a, precedence(a) < prec)?;
    f.write_char(op)?;
    child(f, b, precedence(b) <= prec)
}

impl Display for Node {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(z) => write_const(f, *z),
            Node::Var(k) => write!(f, "z{}", k + 1),
            Node::Conj(a) => write!(f, "conj({a})"),
            Node::Abs2(a) => write!(f, "abs2({a})"),
            Node::Exp(a) => write!(f, "exp({a})"),
            Node::Log(a) => write!(f, "log({a})"),
            Node::Add(a, b) => binary(f, '+', 1, a, b),
            Node::Sub(a, b) => binary(f, '-', 1, a, b),
            Node::Mul(a, b) => binary(f, '*', 2, a, b),
            Node::Div(a, b) => binary(f, '/', 2, a, b),
            Node::Neg(a) => {
                f.write_char('-')?;
                child(f, a, precedence(a) < 3)
            }
            Node::Pow(a, k) => {
                child(f, a, precedence(a) < ATOM)?;
                if *k < 0 {
                    write!(f, "^({k})")
                } else {
                    write!(f, "^{k}")
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    fn round(src: &str, dim: usize) -> String {
        parse(src, dim).unwrap().to_string()
    }

    #[test]
    fn canonical_forms() {
        assert_eq!(round("z1 * conj( z1 )", 1), "z1*conj(z1)");
        assert_eq!(round("(1+abs2(z1))^(-2)", 1), "(1.0+abs2(z1))^(-2)");
    }

    #[test]
    fn associativity_preserved() {
        assert_eq!(round("z1-(z2-z1)", 2), "z1-(z2-z1)");
        assert_eq!(round("(z1-z2)-z1", 2), "z1-z2-z1");
        assert_eq!(round("z1/(z2*z1)", 2), "z1/(z2*z1)");
        assert_eq!(round("-(z1+z2)", 2), "-(z1+z2)");
        assert_eq!(round("(-z1)^3", 1), "(-z1)^3");
        assert_eq!(round("(z1^2)^3", 1), "(z1^2)^3");
    }

    #[test]
    fn builder_constants_parse_to_same_value() {
        let n = Node::Mul(Box::new(Node::Const(Complex64::new(-1.5, 2.0))), Box::new(Node::Var(0)));
        let text = n.to_string();
        assert_eq!(text, "(-1.5+2.0*i)*z1");
        let back = parse(&text, 1).unwrap();
        let p = [num_complex::Complex64::new(0.3, -0.7)];
        let a = super::super::Expression::new(n, 1).unwrap().eval_value(&p).unwrap();
        let b = back.eval_value(&p).unwrap();
        assert!((a - b).norm() < 1e-15);
    }
}
