//! Builds a gram vocabulary and the alignment lattice for a label, and
//! prints the predecessor structure and a DOT rendering.
//!
//! ```bash
//! cargo run --example vocab_and_lattice > cat.dot
//! ```

use gram_ctc::{GramVocab, Lattice};

fn main() -> gram_ctc::Result<()> {
    let vocab = GramVocab::build(&["C", "A", "T", "CA", "AT", "CT", "TA"], &['C', 'A', 'T'])?;
    println!(
        "// {} outputs (blank first), tau = {}",
        vocab.total_symbols(),
        vocab.tau()
    );

    let label = vocab.encode_label("CAT")?;
    let lattice = Lattice::build(&vocab, &label);
    println!(
        "// {} states, needs at least {} frames",
        lattice.len(),
        lattice.min_path_length()
    );
    for (idx, s) in lattice.states().iter().enumerate() {
        let preds: Vec<String> = lattice
            .preds(idx)
            .iter()
            .map(|&p| format!("({},{})", lattice.states()[p].i, lattice.states()[p].j))
            .collect();
        println!("// ({},{}) <- {}", s.i, s.j, preds.join(" "));
    }
    print!("{}", lattice.to_dot());
    Ok(())
}
