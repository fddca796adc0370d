//! Fixtures shared by the criterion benches.

use contrast_core::{LogitVector, MockTable, ModelInfo, TokenId};

/// Mock table of `vocab` tokens whose default vector has a smooth ramp and
/// never favors end-of-sequence, so decodes run to `max_tokens`.
pub fn ramp_table(vocab: usize) -> MockTable {
    let info = ModelInfo {
        name: format!("ramp-{vocab}"),
        vocab_size: vocab,
        eos_token: TokenId(vocab as u32 - 1),
        tokens: None,
    };
    let mut values: Vec<f64> = (0..vocab).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
    values[vocab - 1] = -20.0;
    MockTable::new(info, LogitVector::new(values).expect("finite")).expect("valid table")
}
