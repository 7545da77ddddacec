use super::DiagnosisCandidate;
use crate::dsl::format_number;
use std::fmt::Write;

fn num(v: f64) -> String {
    // four decimals keeps the trace readable; exact values live in the JSON
    format_number((v * 10_000.0).round() / 10_000.0)
}

/// Renders a fixed-template explanation trace. When the source note is
/// given, each matched fact is quoted from its span.
pub fn explain(candidate: &DiagnosisCandidate, note: Option<&str>) -> String {
    let mut out = String::new();
    let name = candidate.disease.as_str().replace('_', " ");
    writeln!(out, "Why {name}?").unwrap();
    writeln!(
        out,
        "  activation {} from {} fired rule(s); confidence {} (display {})",
        num(candidate.activation),
        candidate.proof.rules.len(),
        num(candidate.confidence),
        num(candidate.display_confidence())
    )
    .unwrap();
    for rule in &candidate.proof.rules {
        writeln!(out, "  rule {} fired with activation {}", rule.id, num(rule.activation)).unwrap();
        for leaf in &rule.leaves {
            if leaf.literal.is_negated() {
                writeln!(
                    out,
                    "    - no evidence of {} (edge {}, contributes {})",
                    leaf.literal.positive(),
                    num(leaf.edge_weight),
                    num(leaf.activation)
                )
                .unwrap();
                continue;
            }
            let matched = leaf
                .matched
                .as_ref()
                .map_or_else(|| "nothing".to_string(), |m| m.to_string());
            write!(
                out,
                "    - {} matched {} at {} (edge {}, contributes {})",
                leaf.literal,
                matched,
                num(leaf.fact_weight),
                num(leaf.edge_weight),
                num(leaf.activation)
            )
            .unwrap();
            if let (Some(text), Some(span)) = (note, leaf.span) {
                if let Some(quote) = span.slice(text) {
                    write!(out, " from \"{quote}\"").unwrap();
                }
            }
            out.push('\n');
        }
    }
    if let Some(prior) = candidate.prior {
        writeln!(out, "  prior {}", num(prior)).unwrap();
    }
    if let Some(posterior) = candidate.posterior {
        writeln!(out, "  posterior {}", num(posterior)).unwrap();
    }
    out
}
