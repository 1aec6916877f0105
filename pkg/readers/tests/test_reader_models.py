import torch

from clozereaders.config import ReaderConfig
from clozereaders.data import (
    Vocab,
    collate,
    encode_examples,
    read_dialogues,
    read_queries,
    vocab_tokens,
)
from clozereaders.models import NEG, build_model, masked_logits

from readerfix import K


def _config(arch):
    filters = (2, 3) if arch.startswith("CNN") else None
    return ReaderConfig(arch, embedding_dim=16, hidden_dim=12,
                        filter_sizes=filters, seed=0)


def _batch(fixture_paths, task, n=5):
    scenes = read_dialogues(fixture_paths["dialogues"])
    queries = read_queries(fixture_paths[task])
    vocab = Vocab.build(vocab_tokens(scenes, queries))
    examples = encode_examples(scenes, queries[:n], vocab, max_len=128)
    return vocab, collate(examples, K, task)


ALL_ARCHS = ("BiLSTM", "CNN_BiLSTM", "CNN_BiLSTM_UA_DA", "TransformerFineTune")


def test_forward_shapes_single_head(fixture_paths):
    vocab, batch = _batch(fixture_paths, "sv")
    for arch in ALL_ARCHS:
        torch.manual_seed(0)
        model = build_model(_config(arch), len(vocab), K, n_heads=1)
        model.eval()
        with torch.no_grad():
            logits = model(batch)
        assert logits.shape == (len(batch), 1, K), arch
        assert torch.isfinite(logits).all(), arch


def test_forward_shapes_two_heads(fixture_paths):
    vocab, batch = _batch(fixture_paths, "tv")
    for arch in ALL_ARCHS:
        torch.manual_seed(0)
        model = build_model(_config(arch), len(vocab), K, n_heads=2)
        model.eval()
        with torch.no_grad():
            logits = model(batch)
        assert logits.shape == (len(batch), 2, K), arch


def test_candidate_masking_forces_in_candidate_argmax(fixture_paths):
    vocab, batch = _batch(fixture_paths, "sv")
    # shrink candidate sets to two entities per query
    batch.cand_mask[:, :] = False
    batch.cand_mask[:, 1] = True
    batch.cand_mask[:, 3] = True
    for arch in ALL_ARCHS:
        torch.manual_seed(1)
        model = build_model(_config(arch), len(vocab), K, n_heads=1)
        model.eval()
        with torch.no_grad():
            logits = masked_logits(model(batch), batch.cand_mask)
        picks = logits.argmax(dim=2).flatten().tolist()
        assert set(picks) <= {1, 3}, arch
        off = logits[:, :, [0, 2]]
        assert (off <= NEG).all(), arch


def test_attention_weights_are_distributions(fixture_paths):
    vocab, batch = _batch(fixture_paths, "sv")
    # make the utterance counts ragged so padding rows exist
    batch.utt_len[0, 5:] = 0
    batch.utts[0, 5:, :] = 0
    torch.manual_seed(2)
    model = build_model(_config("CNN_BiLSTM_UA_DA"), len(vocab), K, n_heads=1)
    model.eval()
    with torch.no_grad():
        _, attention = model(batch, return_attention=True)
    for name in ("utterance", "document"):
        weights = attention[name]
        assert (weights >= 0).all(), name
        sums = weights.sum(dim=1)
        assert torch.allclose(sums, torch.ones_like(sums), atol=1e-6), name
        # padded utterances carry exactly zero mass
        assert (weights[0, 5:] == 0).all(), name


def test_non_attention_models_return_empty_attention(fixture_paths):
    vocab, batch = _batch(fixture_paths, "sv")
    for arch in ("BiLSTM", "CNN_BiLSTM", "TransformerFineTune"):
        torch.manual_seed(0)
        model = build_model(_config(arch), len(vocab), K, n_heads=1)
        model.eval()
        with torch.no_grad():
            logits, attention = model(batch, return_attention=True)
        assert attention == {}
        assert logits.shape == (len(batch), 1, K)


def test_cnn_handles_utterances_shorter_than_filters(fixture_paths):
    vocab, batch = _batch(fixture_paths, "sv", n=2)
    # leave a single real token in one utterance, filters are 2 and 3
    batch.utt_len[0, 0] = 1
    batch.utts[0, 0, 1:] = 0
    torch.manual_seed(3)
    model = build_model(_config("CNN_BiLSTM"), len(vocab), K, n_heads=1)
    model.eval()
    with torch.no_grad():
        logits = model(batch)
    assert torch.isfinite(logits).all()


def test_padding_does_not_change_lstm_encoding(fixture_paths):
    """Packed sequences: widening the batch padding must keep outputs."""
    scenes = read_dialogues(fixture_paths["dialogues"])
    queries = read_queries(fixture_paths["sv"])
    vocab = Vocab.build(vocab_tokens(scenes, queries))
    examples = encode_examples(scenes, queries[:4], vocab, max_len=128)
    torch.manual_seed(4)
    model = build_model(_config("BiLSTM"), len(vocab), K, n_heads=1)
    model.eval()
    short = collate(examples[:1], K, "sv")
    # examples[1:] force wider padding for the same first example
    wide = collate(examples, K, "sv")
    with torch.no_grad():
        a = model(short)[0]
        b = model(wide)[0]
    assert torch.allclose(a, b, atol=1e-6)
