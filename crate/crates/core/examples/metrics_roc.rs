//! Confusion statistics and ROC/AUC for a handful of scored segments.

use ppg_qpr::metrics;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scores = [0.95, 0.91, 0.85, 0.7, 0.62, 0.55, 0.4, 0.33, 0.2, 0.1];
    let truth = [true, true, false, true, true, false, true, false, false, false];
    let preds: Vec<bool> = scores.iter().map(|&s| s >= metrics::DEFAULT_THRESHOLD).collect();

    let c = metrics::confusion(&preds, &truth)?;
    println!("{c:?}");
    println!("{:#?}", c.summary()?);

    let roc = metrics::roc_auc(&scores, &truth)?;
    print!("{}", metrics::roc_csv(&roc));
    println!("auc = {:.4}", roc.auc);
    Ok(())
}
