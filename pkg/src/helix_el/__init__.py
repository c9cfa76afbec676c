"""Entity-linking toolkit for historical text corpora."""

__version__ = "0.1.0"

from .corpus import (CorpusError, CorpusStats, Document, MentionAnnotation,
                     Sentence, Token, compute_stats, parse_conllu,
                     serialize_conllu)
from .kbstore import (KB, EmbeddingIndex, EntityRecord, KBError,
                      PropertyPriority, TypeTaxonomy, expand_types, load_kb,
                      read_embeddings, resolve_entity_date, similarity,
                      types_compatible, write_embeddings)
from .retrieval import (Candidate, CandidateSet, apply_constraints, phi_d,
                        phi_t, retrieve)
from .dynamics import (DynamicsConfig, Game, LinkDecision, MentionEntry,
                       TokenEntry, build_game, payoff, replicator_step,
                       run_dynamics, select_link, select_link_static)
from .nilpred import (NilObservation, NilRule, logistic_predict,
                      logistic_train, nil_dev_mean, nil_dev_median,
                      nil_dev_top, nil_fixed, nil_string, predict_nil,
                      sweep_tau)
from .evalrep import (AgreementInput, ErrorBreakdown, EvalResult,
                      error_breakdown, krippendorff_alpha,
                      plausibility_score, popularity_histogram,
                      popularity_preference, score, spearman, spearman_test)
from .linker import link_corpus, iter_mentions
