use super::RankingError;
use crate::dsl::{PriorEntry, Term};
use crate::inference::DiagnosisCandidate;
use crate::symbol::Symbol;
use serde::{Deserialize, Serialize};

pub const DEFAULT_PRIOR_FLOOR: f64 = 1e-4;

/// Patient attributes used to select prior strata.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sex: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
}

/// Atom-valued stratum coordinates; `None` matches only wildcard entries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stratum {
    pub age_band: Option<Symbol>,
    pub sex: Option<Symbol>,
    pub region: Option<Symbol>,
}

pub fn age_band(age: u32) -> Symbol {
    let name = match age {
        0..=17 => "age_0_17",
        18..=39 => "age_18_39",
        40..=64 => "age_40_64",
        _ => "age_65_plus",
    };
    Symbol::new(name).expect("valid band atom")
}

impl Demographics {
    pub fn stratum(&self) -> Stratum {
        let sex = self.sex.as_deref().and_then(|s| match s.trim().to_ascii_lowercase().as_str() {
            "m" => Symbol::new("male").ok(),
            "f" => Symbol::new("female").ok(),
            other => Symbol::normalize(other),
        });
        Stratum { age_band: self.age.map(age_band), sex, region: self.region.as_deref().and_then(Symbol::normalize) }
    }
}

fn field_matches(term: &Term, value: &Option<Symbol>) -> bool {
    match term {
        Term::Wildcard => true,
        Term::Atom(a) => value.as_ref() == Some(a),
    }
}

/// Prevalence of `disease` for `stratum`: the exact stratum if present,
/// otherwise the matching entry with the fewest wildcards (a specific age
/// band beats a specific sex, which beats a specific region).
pub fn lookup_prior(disease: &Symbol, priors: &[PriorEntry], stratum: &Stratum) -> Option<f64> {
    priors
        .iter()
        .filter(|p| {
            &p.disease == disease
                && field_matches(&p.age_band, &stratum.age_band)
                && field_matches(&p.sex, &stratum.sex)
                && field_matches(&p.region, &stratum.region)
        })
        .min_by_key(|p| {
            let wild = [p.age_band.is_wildcard(), p.sex.is_wildcard(), p.region.is_wildcard()];
            (wild.iter().filter(|w| **w).count(), wild)
        })
        .map(|p| p.prevalence)
}

/// Attaches `prior` and `posterior = ρπ / Σρπ` and re-sorts by posterior,
/// then activation, then name. Without a floor a disease with no matching
/// stratum is an error.
pub fn fuse_priors(
    mut candidates: Vec<DiagnosisCandidate>,
    priors: &[PriorEntry],
    stratum: &Stratum,
    floor: Option<f64>,
) -> Result<Vec<DiagnosisCandidate>, RankingError> {
    for c in &mut candidates {
        let pi = lookup_prior(&c.disease, priors, stratum)
            .or(floor)
            .ok_or_else(|| RankingError::MissingPrior(c.disease.clone()))?;
        c.prior = Some(pi);
    }
    let total: f64 = candidates.iter().map(|c| c.activation * c.prior.unwrap_or(0.0)).sum();
    for c in &mut candidates {
        let joint = c.activation * c.prior.unwrap_or(0.0);
        c.posterior = Some(if total > 0.0 { joint / total } else { 0.0 });
    }
    candidates.sort_by(|a, b| {
        b.posterior
            .unwrap_or(0.0)
            .total_cmp(&a.posterior.unwrap_or(0.0))
            .then_with(|| b.activation.total_cmp(&a.activation))
            .then_with(|| a.disease.cmp(&b.disease))
    });
    Ok(candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_program;

    fn priors(src: &str) -> Vec<PriorEntry> {
        parse_program(src).unwrap().priors
    }

    fn sym(s: &str) -> Symbol {
        Symbol::new(s).unwrap()
    }

    #[test]
    fn fallback_chain() {
        let table = priors(
            "prior(d, _, _, _, 0.01).\nprior(d, age_40_64, _, _, 0.02).\nprior(d, _, male, _, 0.03).\nprior(d, age_40_64, male, _, 0.04).",
        );
        let st = Demographics { age: Some(58), sex: Some("M".into()), region: None }.stratum();
        assert_eq!(lookup_prior(&sym("d"), &table, &st), Some(0.04));
        let st = Demographics { age: Some(58), sex: Some("female".into()), region: None }.stratum();
        assert_eq!(lookup_prior(&sym("d"), &table, &st), Some(0.02));
        let st = Demographics { age: Some(20), sex: Some("male".into()), region: None }.stratum();
        assert_eq!(lookup_prior(&sym("d"), &table, &st), Some(0.03));
        assert_eq!(lookup_prior(&sym("d"), &table, &Stratum::default()), Some(0.01));
        assert_eq!(lookup_prior(&sym("e"), &table, &Stratum::default()), None);
    }

    #[test]
    fn bands() {
        assert_eq!(age_band(17).as_str(), "age_0_17");
        assert_eq!(age_band(18).as_str(), "age_18_39");
        assert_eq!(age_band(64).as_str(), "age_40_64");
        assert_eq!(age_band(65).as_str(), "age_65_plus");
    }
}
