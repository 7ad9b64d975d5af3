"""Contrastive refinement of a dialogue response model against multifaceted
helpfulness feedback."""
from .corpus import (Conversation, SplitSpec, TrainingInstance, Turn, build_instances, parse_corpus,
                     serialize_corpus, split_corpus)
from .decode import Candidate, DecodeConfig, beam_search, diverse_beam_search, greedy
from .losses import (Hyperparams, LossBreakdown, contrastive_loss, length_normalized_logprob, nll_loss,
                     total_loss)
from .model import ModelConfig, TinyTransformer, backward, forward_logprobs
from .tokenizer import Tokenizer, fit_tokenizer

__version__ = "0.1.0"
