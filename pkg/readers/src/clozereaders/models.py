"""The four reader architectures.

Shared scheme: encode the dialogue into h_d and the query into h_q,
concatenate, and classify with a softmax layer over the entity label
space (two layers for the two-variable task). Logits for entities
outside a query's candidate set are masked before both the loss and the
argmax, so a reader cannot emit an off-candidate entity.

BiLSTM            flat token stream -> BiLSTM; query -> BiLSTM.
CNN_BiLSTM        per-utterance convolutions + max pooling -> utterance
                  vectors -> BiLSTM over utterances; query -> BiLSTM.
CNN_BiLSTM_UA_DA  adds utterance-level and document-level attention,
                  dot-product similarity against the query encoding,
                  contexts concatenated with the recurrent outputs.
TransformerFineTune
                  <cls> query <sep> utterances <sep> through a trained
                  from-scratch encoder; the <cls> output feeds the
                  classification layer W in R^{K x H}.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .config import ReaderConfig
from .data import Batch

NEG = -1.0e4  # mask value; finite so softmax rows never go all -inf


def masked_logits(logits: torch.Tensor, cand_mask: torch.Tensor) -> torch.Tensor:
    """[B, H, K] logits with off-candidate entries pushed to NEG."""
    return logits.masked_fill(~cand_mask.unsqueeze(1), NEG)


def _final_state(lstm: nn.LSTM, emb: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
    """Concatenated last fwd/bwd hidden states; packed, so padding never
    touches the recurrence."""
    packed = pack_padded_sequence(
        emb, lengths.cpu().clamp(min=1), batch_first=True, enforce_sorted=False
    )
    _, (h, _) = lstm(packed)
    return torch.cat([h[0], h[1]], dim=1)


def _full_states(lstm: nn.LSTM, emb: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
    packed = pack_padded_sequence(
        emb, lengths.cpu().clamp(min=1), batch_first=True, enforce_sorted=False
    )
    out, _ = lstm(packed)
    out, _ = pad_packed_sequence(out, batch_first=True, total_length=emb.shape[1])
    return out


class _Heads(nn.Module):
    """One linear classifier per display variable."""

    def __init__(self, feat_dim: int, n_classes: int, n_heads: int):
        super().__init__()
        self.layers = nn.ModuleList(
            nn.Linear(feat_dim, n_classes) for _ in range(n_heads)
        )

    def forward(self, feats: torch.Tensor) -> torch.Tensor:
        return torch.stack([layer(feats) for layer in self.layers], dim=1)


class BiLSTMReader(nn.Module):
    def __init__(self, cfg: ReaderConfig, vocab_size: int, n_classes: int,
                 n_heads: int):
        super().__init__()
        e, h = cfg.embedding_dim, cfg.hidden_dim
        self.embed = nn.Embedding(vocab_size, e, padding_idx=0)
        self.doc_lstm = nn.LSTM(e, h, batch_first=True, bidirectional=True)
        self.query_lstm = nn.LSTM(e, h, batch_first=True, bidirectional=True)
        self.heads = _Heads(4 * h, n_classes, n_heads)

    def forward(self, batch: Batch, return_attention: bool = False):
        h_d = _final_state(self.doc_lstm, self.embed(batch.doc), batch.doc_len)
        h_q = _final_state(self.query_lstm, self.embed(batch.query), batch.query_len)
        logits = self.heads(torch.cat([h_d, h_q], dim=1))
        return (logits, {}) if return_attention else logits


class _UtteranceCNN(nn.Module):
    """Per-utterance convolutions, ReLU, max over time, filters concatenated."""

    def __init__(self, cfg: ReaderConfig):
        super().__init__()
        e, c = cfg.embedding_dim, cfg.hidden_dim
        self.convs = nn.ModuleList(
            nn.Conv1d(e, c, k) for k in cfg.filter_sizes
        )
        self.widths = tuple(cfg.filter_sizes)
        self.out_dim = c * len(self.widths)

    def forward(self, embed: nn.Embedding, utts: torch.Tensor,
                utt_len: torch.Tensor) -> torch.Tensor:
        b, u, width = utts.shape
        need = max(self.widths)
        if width < need:
            utts = F.pad(utts, (0, need - width))
            width = need
        flat = utts.reshape(b * u, width)
        emb = embed(flat).transpose(1, 2)  # [B*U, E, W]
        lens = utt_len.reshape(b * u)
        pooled = []
        for conv, k in zip(self.convs, self.widths):
            feat = F.relu(conv(emb))  # [B*U, C, W-k+1]
            # window t is valid iff it fits inside the real tokens; window 0
            # stays valid for utterances shorter than the filter, reading
            # zero padding rather than producing no feature at all
            pos = torch.arange(feat.shape[2], device=feat.device)
            valid = pos.unsqueeze(0) <= (lens.unsqueeze(1) - k).clamp(min=0)
            feat = feat.masked_fill(~valid.unsqueeze(1), NEG)
            pooled.append(feat.max(dim=2).values)
        vecs = torch.cat(pooled, dim=1)  # [B*U, F]
        vecs = torch.where(lens.unsqueeze(1) > 0, vecs,
                           torch.zeros_like(vecs))
        return vecs.reshape(b, u, self.out_dim)


class CNNBiLSTMReader(nn.Module):
    with_attention = False

    def __init__(self, cfg: ReaderConfig, vocab_size: int, n_classes: int,
                 n_heads: int):
        super().__init__()
        e, h = cfg.embedding_dim, cfg.hidden_dim
        self.embed = nn.Embedding(vocab_size, e, padding_idx=0)
        self.cnn = _UtteranceCNN(cfg)
        self.doc_lstm = nn.LSTM(self.cnn.out_dim, h, batch_first=True,
                                bidirectional=True)
        self.query_lstm = nn.LSTM(e, h, batch_first=True, bidirectional=True)
        feat = 4 * h + (2 * h + self.cnn.out_dim if self.with_attention else 0)
        if self.with_attention:
            self.da_proj = nn.Linear(2 * h, self.cnn.out_dim)
        self.heads = _Heads(feat, n_classes, n_heads)

    def forward(self, batch: Batch, return_attention: bool = False):
        utt_vecs = self.cnn(self.embed, batch.utts, batch.utt_len)  # [B, U, F]
        n_utts = batch.utt_len.gt(0).sum(dim=1)
        h_d = _final_state(self.doc_lstm, utt_vecs, n_utts)
        h_q = _final_state(self.query_lstm, self.embed(batch.query),
                           batch.query_len)
        feats = [h_d, h_q]
        attention = {}
        if self.with_attention:
            real = batch.utt_len.gt(0)  # [B, U]
            states = _full_states(self.doc_lstm, utt_vecs, n_utts)  # [B, U, 2H]
            ua_scores = torch.bmm(states, h_q.unsqueeze(2)).squeeze(2)
            ua = F.softmax(ua_scores.masked_fill(~real, NEG), dim=1)
            ua = ua * real.float()  # exact zeros on padded utterances
            ua = ua / ua.sum(dim=1, keepdim=True).clamp(min=1e-12)
            feats.append(torch.bmm(ua.unsqueeze(1), states).squeeze(1))
            da_scores = torch.bmm(
                utt_vecs, self.da_proj(h_q).unsqueeze(2)
            ).squeeze(2)
            da = F.softmax(da_scores.masked_fill(~real, NEG), dim=1)
            da = da * real.float()
            da = da / da.sum(dim=1, keepdim=True).clamp(min=1e-12)
            feats.append(torch.bmm(da.unsqueeze(1), utt_vecs).squeeze(1))
            attention = {"utterance": ua, "document": da}
        logits = self.heads(torch.cat(feats, dim=1))
        return (logits, attention) if return_attention else logits


class CNNBiLSTMAttentionReader(CNNBiLSTMReader):
    with_attention = True


class TransformerReader(nn.Module):
    def __init__(self, cfg: ReaderConfig, vocab_size: int, n_classes: int,
                 n_heads: int):
        super().__init__()
        d = cfg.embedding_dim
        self.embed = nn.Embedding(vocab_size, d, padding_idx=0)
        self.position = nn.Embedding(cfg.max_len, d)
        layer = nn.TransformerEncoderLayer(
            d_model=d, nhead=cfg.n_heads, dim_feedforward=4 * d,
            batch_first=True, dropout=0.1,
        )
        self.encoder = nn.TransformerEncoder(
            layer, cfg.n_layers, enable_nested_tensor=False
        )
        self.heads = _Heads(d, n_classes, n_heads)

    def forward(self, batch: Batch, return_attention: bool = False):
        ids = batch.joint
        pos = torch.arange(ids.shape[1], device=ids.device)
        x = self.embed(ids) + self.position(pos).unsqueeze(0)
        out = self.encoder(x, src_key_padding_mask=batch.joint_pad)
        logits = self.heads(out[:, 0])
        return (logits, {}) if return_attention else logits


_BUILDERS = {
    "BiLSTM": BiLSTMReader,
    "CNN_BiLSTM": CNNBiLSTMReader,
    "CNN_BiLSTM_UA_DA": CNNBiLSTMAttentionReader,
    "TransformerFineTune": TransformerReader,
}


def build_model(cfg: ReaderConfig, vocab_size: int, n_classes: int,
                n_heads: int) -> nn.Module:
    return _BUILDERS[cfg.architecture](cfg, vocab_size, n_classes, n_heads)
