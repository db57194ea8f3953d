//! Symbolic Wirtinger derivatives.

use super::Node;

/// `∂node/∂z_var`, or `∂node/∂z̄_var` when `conj` is set.
pub(super) fn wirtinger(node: &Node, var: usize, conj: bool) -> Node {
    let d = |a: &Node| wirtinger(a, var, conj);
    match node {
        Node::Const(_) => Node::real(0.0),
        Node::Var(k) => Node::real(if *k == var && !conj { 1.0 } else { 0.0 }),
        Node::Conj(a) => Node::conj(wirtinger(a, var, !conj)),
        Node::Add(a, b) => Node::add(d(a), d(b)),
        Node::Sub(a, b) => Node::sub(d(a), d(b)),
        Node::Neg(a) => Node::neg(d(a)),
        Node::Mul(a, b) => Node::add(Node::mul(d(a), (**b).clone()), Node::mul((**a).clone(), d(b))),
        Node::Div(a, b) => {
            let da = d(a);
            let db = d(b);
            let first = Node::div(da, (**b).clone());
            if db.is_zero() {
                return first;
            }
            Node::sub(
                first,
                Node::div(Node::mul((**a).clone(), db), Node::pow((**b).clone(), 2)),
            )
        }
        Node::Pow(a, k) => {
            let da = d(a);
            if da.is_zero() {
                return Node::real(0.0);
            }
            Node::mul(Node::mul(Node::real(*k as f64), Node::pow((**a).clone(), k - 1)), da)
        }
        Node::Exp(a) => Node::mul(node.clone(), d(a)),
        Node::Log(a) => {
            let da = d(a);
            if da.is_zero() {
                return Node::real(0.0);
            }
            Node::div(da, (**a).clone())
        }
        Node::Abs2(a) => {
            let da = d(a);
            let dconj = Node::conj(wirtinger(a, var, !conj));
            Node::add(
                Node::mul(da, Node::conj((**a).clone())),
                Node::mul((**a).clone(), dconj),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64;

    use super::super::parse;

    #[test]
    fn symbolic_matches_jet() {
        let srcs = [
            "abs2(z1)*exp(-abs2(z2))",
            "log(1+abs2(z1)+2*abs2(z2))",
            "(1+abs2(z1))^(-2)*conj(z2)*z1",
            "z1*conj(z2)/(3+abs2(z1*z2))",
        ];
        let p = [Complex64::new(0.3, -0.2), Complex64::new(-0.4, 0.7)];
        for src in srcs {
            let e = parse(src, 2).unwrap();
            let jet = e.eval_jet(&p).unwrap();
            for k in 0..2 {
                let dz = e.wirtinger(k, false).eval_value(&p).unwrap();
                let dzb = e.wirtinger(k, true).eval_value(&p).unwrap();
                assert!((dz - jet.dz[k]).norm() < 1e-12, "{src} dz{k}");
                assert!((dzb - jet.dzbar[k]).norm() < 1e-12, "{src} dzbar{k}");
                for l in 0..2 {
                    let h = e.wirtinger(k, false).wirtinger(l, true).eval_value(&p).unwrap();
                    assert!((h - jet.hess[(k, l)]).norm() < 1e-12, "{src} hess{k}{l}");
                }
            }
        }
    }
}
