//! CSV renderings of aggregated results.

use crate::eval::Summary;
use crate::experiment::ExperimentReport;

pub const TABLE_HEADER: &str = "model,dataset,concat_dim,pca_variance_sum,concat_ar1,pca_ar1,\
adapted_ar1_sigma1_mean,adapted_ar1_sigma1_std,adapted_ar1_sigma15_mean,adapted_ar1_sigma15_std";

/// One table row. Baseline columns come from the first report (all
/// temperatures share splits and PCA). Adapted columns use the
/// bootstrap-selected epoch; a temperature without a report is left empty.
pub fn table_row(model: &str, dataset: &str, reports: &[&ExperimentReport]) -> Option<String> {
    let first = reports.first()?;
    let k1 = first.k_index(1)?;
    let adapted = |sigma: f64| -> (String, String) {
        reports
            .iter()
            .find(|r| r.sigma == sigma)
            .and_then(|r| r.k_index(1).map(|i| r.adapted_selected[i]))
            .map(|s| (s.mean.to_string(), s.std.to_string()))
            .unwrap_or_default()
    };
    let (s1_mean, s1_std) = adapted(1.0);
    let (s15_mean, s15_std) = adapted(15.0);
    Some(format!(
        "{},{},{},{},{},{},{},{},{},{}",
        csv_field(model),
        csv_field(dataset),
        first.concat_dim,
        first.pca_variance_sum.mean,
        first.concat[k1].mean,
        first.pca[k1].mean,
        s1_mean,
        s1_std,
        s15_mean,
        s15_std
    ))
}

pub fn table_csv(model: &str, dataset: &str, reports: &[&ExperimentReport]) -> Option<String> {
    Some(format!(
        "{TABLE_HEADER}\n{}\n",
        table_row(model, dataset, reports)?
    ))
}

/// `k,mean,std` for one configuration.
pub fn curve_csv(ks: &[usize], summaries: &[Summary]) -> String {
    let mut out = String::from("k,mean,std\n");
    for (k, s) in ks.iter().zip(summaries) {
        out.push_str(&format!("{k},{},{}\n", s.mean, s.std));
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
