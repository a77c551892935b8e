"""Identification accuracy, template enrollment, cosine verification, and EER.

Authentication protocol (kept fixed so cross-model comparisons stay valid,
and versioned in every report): per user, enroll a unit-normalized mean
embedding over that user's train samples; score every test sample against
every template with cosine similarity; pool own-user scores as genuine and
cross-user scores as impostor; one global EER over the pooled sets.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

AUTH_PROTOCOL = "cosine-pooled-global-v1"


@dataclass
class UserTemplate:
    user_id: str
    centroid: np.ndarray  # unit L2 norm
    enrollment_count: int


@dataclass
class ScoreSet:
    genuine: list[float] = field(default_factory=list)
    impostor: list[float] = field(default_factory=list)


@dataclass
class EvalReport:
    accuracy: float | None = None
    eer: float | None = None
    eer_threshold: float | None = None
    num_genuine: int = 0
    num_impostor: int = 0
    per_user: dict = field(default_factory=dict)
    confusion: dict = field(default_factory=dict)
    protocol: str = AUTH_PROTOCOL

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "eer": self.eer,
            "eer_threshold": self.eer_threshold,
            "num_genuine": self.num_genuine,
            "num_impostor": self.num_impostor,
            "per_user": self.per_user,
            "confusion": self.confusion,
            "protocol": self.protocol,
        }


def accuracy(preds, labels) -> float:
    preds = list(preds)
    labels = list(labels)
    if len(preds) != len(labels):
        raise ValueError(f"accuracy: {len(preds)} predictions vs {len(labels)} labels")
    if not preds:
        raise ValueError("accuracy: empty inputs")
    return sum(p == t for p, t in zip(preds, labels)) / len(preds)


def enroll(model, seqs) -> UserTemplate:
    """Unit-normalized mean of pooled embeddings over one user's samples."""
    seqs = list(seqs)
    if not seqs:
        raise ValueError("enroll: empty enrollment set")
    users = {s.user_id for s in seqs}
    if len(users) != 1:
        raise ValueError(f"enroll: mixed users {sorted(users)}")
    mean = model.pooled_embeddings(seqs).mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0.0:
        raise ValueError("enroll: zero-norm mean embedding")
    return UserTemplate(seqs[0].user_id, mean / norm, len(seqs))


def cosine_score(embedding: np.ndarray, template: UserTemplate) -> float:
    norm = np.linalg.norm(embedding)
    if norm == 0.0:
        raise ValueError("verify: zero-norm embedding")
    return float(embedding @ template.centroid / norm)


def verify(model, seq, template: UserTemplate) -> float:
    return cosine_score(model.pooled_embedding(seq), template)


def compute_eer(genuine, impostor) -> tuple[float, float]:
    """Discrete EER: sweep every distinguishable threshold (score values, the
    midpoints between adjacent distinct values, and one point above the max),
    with FAR(t) = fraction of impostor scores >= t and FRR(t) = fraction of
    genuine scores < t. Returns ((FAR + FRR) / 2, t) at the threshold
    minimizing |FAR - FRR|, ties broken toward the lower threshold.
    """
    g = np.sort(np.asarray(list(genuine), dtype=np.float64))
    i = np.sort(np.asarray(list(impostor), dtype=np.float64))
    if g.size == 0 or i.size == 0:
        raise ValueError("compute_eer: both genuine and impostor scores are required")
    values = np.unique(np.concatenate([g, i]))
    mids = (values[:-1] + values[1:]) / 2.0
    cands = np.unique(np.concatenate([values, mids, [values[-1] + 1.0]]))
    far = (i.size - np.searchsorted(i, cands, side="left")) / i.size
    frr = np.searchsorted(g, cands, side="left") / g.size
    best = int(np.argmin(np.abs(far - frr)))  # argmin keeps the first (lowest) threshold
    return float((far[best] + frr[best]) / 2.0), float(cands[best])


def evaluate_identification(model, seqs, user_index: dict) -> EvalReport:
    seqs = list(seqs)
    labels = [user_index[s.user_id] for s in seqs]
    preds = model.predict(seqs)
    users = sorted(user_index, key=user_index.get)
    report = EvalReport(accuracy=accuracy(preds, labels))
    for s, p, t in zip(seqs, preds, labels):
        stats = report.per_user.setdefault(s.user_id, {"correct": 0, "total": 0})
        stats["total"] += 1
        stats["correct"] += int(p == t)
        row = report.confusion.setdefault(s.user_id, {})
        pred_user = users[p]
        row[pred_user] = row.get(pred_user, 0) + 1
    return report


def score_authentication(model, split) -> ScoreSet:
    """Enroll every user on train; score all test samples against all templates."""
    templates = {}
    for user in split.users:
        own = [s for s in split.train if s.user_id == user]
        if not own:
            raise ValueError(f"user {user} has no enrollment samples in the train split")
        templates[user] = enroll(model, own)
    scores = ScoreSet()
    for seq in split.test:
        emb = model.pooled_embedding(seq)
        for user in split.users:
            value = cosine_score(emb, templates[user])
            if user == seq.user_id:
                scores.genuine.append(value)
            else:
                scores.impostor.append(value)
    return scores


def evaluate_authentication(model, split) -> EvalReport:
    scores = score_authentication(model, split)
    eer, threshold = compute_eer(scores.genuine, scores.impostor)
    return EvalReport(eer=eer, eer_threshold=threshold,
                      num_genuine=len(scores.genuine), num_impostor=len(scores.impostor))


def evaluate(model, split) -> EvalReport:
    """Identification + authentication in one report."""
    ident = evaluate_identification(model, split.test, split.user_index)
    auth = evaluate_authentication(model, split)
    ident.eer = auth.eer
    ident.eer_threshold = auth.eer_threshold
    ident.num_genuine = auth.num_genuine
    ident.num_impostor = auth.num_impostor
    return ident


def export_embeddings(model, seqs, path) -> None:
    """CSV rows user_id,e0,e1,... -- one row per sample, for external projection."""
    seqs = list(seqs)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for seq in seqs:
            emb = model.pooled_embedding(seq)
            writer.writerow([seq.user_id] + [repr(x) for x in emb.tolist()])
