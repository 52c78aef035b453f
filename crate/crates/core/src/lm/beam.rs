use std::cmp::Ordering;

use super::{is_reserved, Context, LanguageModel, END};
use crate::error::{Error, Result};

/// Outcome of [`beam_search`].
#[derive(Clone, Debug, PartialEq)]
pub struct BeamResult {
    pub tokens: Vec<String>,
    /// Total log-probability, including the END term when finished.
    pub score: f64,
    pub finished: bool,
}

#[derive(Clone)]
struct Hypothesis {
    tokens: Vec<String>,
    score: f64,
}

fn by_score(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Left-to-right beam search over the backend vocabulary.
///
/// Each of at most `max_len` steps appends a word or END. Hypotheses that
/// emit END leave the beam. The best finished hypothesis is returned, or the
/// best unfinished one when nothing finished.
pub fn beam_search<M: LanguageModel + ?Sized>(
    model: &M,
    ctx: &Context<'_>,
    k: usize,
    max_len: usize,
) -> Result<BeamResult> {
    if k == 0 || max_len == 0 {
        return Err(Error::InvalidParameter(
            "beam size and maximum length must be positive".into(),
        ));
    }
    let mut alive = vec![Hypothesis {
        tokens: Vec::new(),
        score: 0.0,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();

    for _ in 0..max_len {
        let mut expansions = Vec::new();
        for hyp in &alive {
            let dist = model.next_token_logprobs(ctx, &hyp.tokens)?;
            for (token, lp) in dist.entries() {
                if lp == f64::NEG_INFINITY || (is_reserved(token) && token != END) {
                    continue;
                }
                let mut tokens = hyp.tokens.clone();
                tokens.push(token.to_owned());
                expansions.push(Hypothesis {
                    tokens,
                    score: hyp.score + lp,
                });
            }
        }
        expansions.sort_by(by_score);
        expansions.truncate(k);
        alive.clear();
        for hyp in expansions {
            if hyp.tokens.last().map(String::as_str) == Some(END) {
                finished.push(hyp);
            } else {
                alive.push(hyp);
            }
        }
        let best_finished = finished.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
        // Scores only decrease, so no alive hypothesis can overtake.
        if alive.iter().all(|h| h.score <= best_finished) {
            break;
        }
    }

    finished.sort_by(by_score);
    if let Some(mut best) = finished.into_iter().next() {
        best.tokens.pop();
        return Ok(BeamResult {
            tokens: best.tokens,
            score: best.score,
            finished: true,
        });
    }
    alive.sort_by(by_score);
    let best = alive.into_iter().next().unwrap_or(Hypothesis {
        tokens: Vec::new(),
        score: f64::NEG_INFINITY,
    });
    Ok(BeamResult {
        tokens: best.tokens,
        score: best.score,
        finished: false,
    })
}
