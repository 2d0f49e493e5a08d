//! Gram-CTC loss and gradient for one utterance, the same label under plain
//! CTC, and a joint weighted loss over both.
//!
//! ```bash
//! cargo run --example loss_and_gradient
//! ```

use gram_ctc::loss::{joint_loss, JointTerm};
use gram_ctc::refctc::ctc_loss_grad;
use gram_ctc::{gram_ctc_loss_grad, GramVocab, LogitsMatrix};

fn main() -> gram_ctc::Result<()> {
    let units = ['e', 'h', 't'];
    let gram_vocab = GramVocab::build(&["e", "h", "t", "th", "he"], &units)?;
    let label = gram_vocab.encode_label("the")?;

    // 4 frames over blank, e, h, t, th, he
    let logits = LogitsMatrix::from_rows(&[
        [2.0, 0.1, 0.0, 0.5, 1.5, 0.0],
        [0.0, 0.0, 0.3, 0.2, 2.5, 0.4],
        [0.5, 1.0, 0.8, 0.0, 0.2, 1.2],
        [1.0, 2.0, 0.0, 0.0, 0.0, 0.3],
    ])?;
    let gram = gram_ctc_loss_grad(&logits, &label, &gram_vocab)?;
    println!("Gram-CTC loss: {:.6}", gram.loss);
    for (t, row) in gram.grad.to_rows().iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|g| format!("{g:+.4}")).collect();
        println!("  grad t={t}: {}", cells.join(" "));
    }

    // plain CTC sees only blank + units
    let unit_logits = LogitsMatrix::from_rows(
        &logits
            .values()
            .to_rows()
            .iter()
            .map(|r| r[..4].to_vec())
            .collect::<Vec<_>>(),
    )?;
    let ctc = ctc_loss_grad(&unit_logits, &label, &units)?;
    println!("CTC loss over units only: {:.6}", ctc.loss);

    let joint = joint_loss(vec![
        JointTerm::new(1.0, || gram_ctc_loss_grad(&logits, &label, &gram_vocab)),
        JointTerm::new(0.5, || ctc_loss_grad(&unit_logits, &label, &units)),
    ])?;
    println!("joint loss (1.0 x gram + 0.5 x ctc): {:.6}", joint.loss);

    match gram_ctc_loss_grad(&logits, &gram_vocab.encode_label("teeth")?, &gram_vocab) {
        Err(e) => println!("too long for 4 frames: {e}"),
        Ok(lg) => println!("unexpected loss {}", lg.loss),
    }
    Ok(())
}
