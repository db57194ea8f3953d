//! Built-in configurations.

use crate::config::{
    BudgetBlock, BundleBlock, GridBlock, PerturbBlock, RunConfig, Task, Tolerances, TwistBlock, DEFAULT_SEED,
};
use crate::CliError;

pub const NAMES: [&str; 6] = [
    "fs_cp1",
    "fs_cpn_product",
    "flat_torus",
    "poincare_disk",
    "hopf_chart",
    "semi_positive_perturb_demo",
];

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn sections(xs: &[&[&str]]) -> Vec<Vec<String>> {
    xs.iter().map(|s| strings(s)).collect()
}

fn base(name: &str, tasks: Vec<Task>, bundle: BundleBlock, count: usize) -> RunConfig {
    RunConfig {
        name: Some(name.to_string()),
        seed: DEFAULT_SEED,
        tasks,
        output: None,
        bundle: Some(bundle),
        finsler: None,
        grid: GridBlock { count, points: None },
        budget: BudgetBlock::default(),
        tolerances: Tolerances::default(),
        perturb: None,
        twist: None,
        projectivize: None,
    }
}

pub fn gallery(name: &str) -> Result<RunConfig, CliError> {
    use Task::*;
    let cfg = match name {
        "fs_cp1" => {
            let h = "(1+abs2(z1))^(-2)";
            let mut c = base(
                name,
                vec![Curvature, Certify, Hsc, Projectivize, Twist],
                BundleBlock {
                    n: 1,
                    r: 1,
                    h: strings(&[h]),
                    omega: Some(strings(&[h])),
                    domain: None,
                    sections: sections(&[&["1"], &["z1"], &["z1^2"]]),
                },
                5,
            );
            c.twist = Some(TwistBlock {
                line: "exp(abs2(z1))".into(),
                k: 1,
            });
            c
        }
        "fs_cpn_product" => {
            let h = ["(1+abs2(z1))^(-2)", "0", "0", "(1+abs2(z2))^(-2)"];
            base(
                name,
                vec![Curvature, Certify, Hsc, Projectivize],
                BundleBlock {
                    n: 2,
                    r: 2,
                    h: strings(&h),
                    omega: Some(strings(&h)),
                    domain: None,
                    sections: sections(&[&["1", "0"], &["z1", "z2"]]),
                },
                3,
            )
        }
        "flat_torus" => base(
            name,
            vec![Curvature, Certify, Hsc, Projectivize],
            BundleBlock {
                n: 2,
                r: 2,
                h: strings(&["1", "0", "0", "1"]),
                omega: None,
                domain: None,
                sections: sections(&[&["z1", "z2"]]),
            },
            3,
        ),
        "poincare_disk" => {
            let h = "(1-abs2(z1))^(-2)";
            base(
                name,
                vec![Curvature, Certify, Hsc],
                BundleBlock {
                    n: 1,
                    r: 1,
                    h: strings(&[h]),
                    omega: Some(strings(&[h])),
                    domain: Some(vec![[-0.5, 0.5, -0.5, 0.5]]),
                    sections: sections(&[&["1"], &["z1"]]),
                },
                5,
            )
        }
        "hopf_chart" => {
            let d = "1/(abs2(z1)+abs2(z2))";
            base(
                name,
                vec![Curvature, Certify, Hsc],
                BundleBlock {
                    n: 2,
                    r: 2,
                    h: strings(&[d, "0", "0", d]),
                    omega: None,
                    domain: Some(vec![[0.5, 1.5, -0.5, 0.5], [-0.5, 0.5, -0.5, 0.5]]),
                    sections: sections(&[&["1", "0"], &["z2", "z1"]]),
                },
                3,
            )
        }
        "semi_positive_perturb_demo" => {
            let mut c = base(
                name,
                vec![Curvature, Certify, Perturb],
                BundleBlock {
                    n: 1,
                    r: 2,
                    h: strings(&["exp(-abs2(z1)^3/9)", "0", "0", "exp(-abs2(z1))"]),
                    omega: None,
                    domain: None,
                    sections: sections(&[&["1", "0"], &["z1", "1"]]),
                },
                9,
            );
            c.perturb = Some(PerturbBlock {
                phi: "abs2(z1) - abs2(z1)^2".into(),
                s_radius: 0.3,
                s_center: None,
            });
            c
        }
        other => return Err(CliError::UnknownGallery(other.to_string())),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// The configuration as TOML, loadable by `load_config`.
pub fn emit_config(cfg: &RunConfig) -> String {
    toml::to_string_pretty(cfg).expect("configs serialize to TOML")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn every_entry_validates_and_round_trips() {
        for name in NAMES {
            let cfg = gallery(name).unwrap();
            let text = emit_config(&cfg);
            assert_eq!(parse_config(&text).unwrap(), cfg, "{name}:\n{text}");
        }
    }

    #[test]
    fn unknown_name() {
        let err = gallery("nope").unwrap_err();
        assert!(err.to_string().contains("fs_cp1"));
    }

    #[test]
    fn flat_torus_is_identity() {
        let cfg = gallery("flat_torus").unwrap();
        assert_eq!(cfg.bundle.unwrap().h, strings(&["1", "0", "0", "1"]));
    }
}
