//! Greedy max-decoding with a framewise dump, and prefix beam search that
//! adds up every decomposition and alignment of each candidate label.
//!
//! ```bash
//! cargo run --example decoding
//! ```

use gram_ctc::decode::{beam_search, framewise_dump, greedy_decode};
use gram_ctc::{log_softmax, GramVocab, LogitsMatrix};

fn main() -> gram_ctc::Result<()> {
    let vocab = GramVocab::build(&["e", "h", "t", "th"], &['e', 'h', 't'])?;
    // blank, e, h, t, th
    let logits = LogitsMatrix::from_rows(&[
        [3.0, 0.0, 0.0, 0.5, 0.5],
        [0.0, 0.0, 0.2, 1.6, 2.0],
        [0.0, 0.0, 1.7, 0.0, 2.0],
        [0.5, 3.0, 0.0, 0.0, 0.0],
    ])?;
    let post = log_softmax(&logits);

    let greedy = greedy_decode(&post, &vocab);
    println!("framewise: {}", framewise_dump(&greedy.framewise, &vocab));
    println!(
        "greedy:    {:?} (path log prob {:.4})",
        greedy.label.to_string(),
        greedy.path_log_prob
    );

    for width in [1, 4, 32] {
        let hyps = beam_search(&post, &vocab, width, 3)?;
        let shown: Vec<String> = hyps
            .iter()
            .map(|h| format!("{:?} {:.4}", h.label.to_string(), h.log_prob))
            .collect();
        println!("beam {width:>2}:   {}", shown.join(", "));
    }
    Ok(())
}
