//! Group selection and the per-group analysis pipeline.
//!
//! Every analysis subcommand funnels through [`analyze_groups`]: select the
//! (agent, style, domain) groups, then per group fit both variants, pick by
//! AIC, score LOOCV consistency, and compute the judgment signatures. A
//! group that cannot be analyzed becomes a located failure string instead
//! of sinking the whole run.

use collider_core::data::{AgentGroup, Dataset, PromptStyle};
use collider_core::estimator::{loocv_r2, select_by_aic, FitOptions, TaskObservations};
use collider_core::report::AgentReport;
use collider_core::signatures::{SignatureReport, DEFAULT_LEVEL};

/// Matches `pattern` with `*` (any run) and `?` (any one char) wildcards
/// against the whole of `text`.
pub fn glob_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    let (mut pi, mut ti) = (0, 0);
    let mut star: Option<usize> = None;
    let mut mark = 0;
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '?' || p[pi] == t[ti]) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == '*' {
            star = Some(pi);
            mark = ti;
            pi += 1;
        } else if let Some(s) = star {
            // Let the last '*' swallow one more character and retry.
            pi = s + 1;
            mark += 1;
            ti = mark;
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '*')
}

/// Knobs shared by the analysis subcommands.
pub struct AnalysisOptions {
    pub epsilon: f64,
    pub bootstrap: usize,
    pub seed: u64,
    /// Reference battery for spearman_vs_reference, normalized task means.
    pub reference_means: Option<[f64; 11]>,
}

/// Groups matching the agent glob and style filter, in canonical order.
pub fn select_groups(
    dataset: &Dataset,
    agent: &str,
    style: Option<PromptStyle>,
) -> Vec<AgentGroup> {
    dataset
        .groups()
        .into_iter()
        .filter(|g| glob_match(agent, &g.key.agent_id))
        .filter(|g| style.is_none_or(|s| g.key.prompt_style == s))
        .collect()
}

/// All group keys in the dataset, for "nothing matched" error messages.
pub fn available_groups(dataset: &Dataset) -> Vec<String> {
    dataset.groups().iter().map(|g| g.key.to_string()).collect()
}

/// The normalized task-mean battery of the single group the selector names.
pub fn reference_battery(
    dataset: &Dataset,
    agent: &str,
    style: Option<PromptStyle>,
) -> Result<[f64; 11], String> {
    let groups = select_groups(dataset, agent, style);
    match groups.as_slice() {
        [] => Err(format!("reference agent {agent:?} matched no group")),
        [group] => {
            let obs = TaskObservations::from_pairs(group.normalized_judgments())
                .map_err(|e| format!("reference {}: {e}", group.key))?;
            obs.complete_means()
                .map_err(|e| format!("reference {}: {e}", group.key))
        }
        many => Err(format!(
            "reference agent {agent:?} matched {} groups ({}); it must identify exactly one",
            many.len(),
            many.iter()
                .map(|g| g.key.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        )),
    }
}

/// Fit → select → LOOCV → signatures for one group.
pub fn analyze_group(group: &AgentGroup, opts: &AnalysisOptions) -> Result<AgentReport, String> {
    let obs = TaskObservations::from_pairs(group.normalized_judgments())
        .map_err(|e| e.to_string())?;
    let fit_opts = FitOptions {
        seed: opts.seed,
        ..FitOptions::default()
    };
    let fitted = select_by_aic(&obs, &fit_opts).map_err(|e| e.to_string())?;
    let consistency = loocv_r2(&obs, fitted.variant, &fit_opts).map_err(|e| e.to_string())?;
    let signatures = SignatureReport::compute(
        &obs,
        opts.epsilon,
        opts.bootstrap,
        DEFAULT_LEVEL,
        opts.seed,
        consistency.loocv_r2,
        opts.reference_means.as_ref().map(|m| m.as_slice()),
    )
    .map_err(|e| e.to_string())?;
    Ok(AgentReport::new(&group.key, &obs, fitted, consistency, signatures))
}

/// Analyzes each group on its own thread (the groups are independent) and
/// returns reports and located failures, both in the input group order.
pub fn analyze_groups(
    groups: &[AgentGroup],
    opts: &AnalysisOptions,
) -> (Vec<AgentReport>, Vec<(String, String)>) {
    std::thread::scope(|scope| {
        let handles: Vec<_> = groups
            .iter()
            .map(|group| scope.spawn(move || analyze_group(group, opts)))
            .collect();
        let mut reports = Vec::new();
        let mut failures = Vec::new();
        for (group, handle) in groups.iter().zip(handles) {
            match handle.join().expect("group analysis panicked") {
                Ok(report) => reports.push(report),
                Err(message) => failures.push((group.key.to_string(), message)),
            }
        }
        (reports, failures)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glob_matches_wildcards() {
        assert!(glob_match("*", "anything"));
        assert!(glob_match("gpt-*", "gpt-4o"));
        assert!(glob_match("*-pro", "gemini-2.5-pro"));
        assert!(glob_match("h?man", "human"));
        assert!(glob_match("*an*", "human"));
        assert!(!glob_match("gpt-*", "llama"));
        assert!(!glob_match("h?man", "hesitant"));
        assert!(!glob_match("", "x"));
        assert!(glob_match("", ""));
        assert!(glob_match("**", "x"));
        assert!(glob_match("human", "human"));
        assert!(!glob_match("human", "humans"));
    }
}
