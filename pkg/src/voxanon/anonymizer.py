"""Speaker look-up table and pseudo-speaker anonymization.

The table holds one embedding row per real speaker plus a reserved
pseudo-speaker row that is never used as a real identity. An anonymized
identity is built from two parts:

* the pseudo-speaker row, shared by every source speaker, and
* the mean of ``k`` real rows drawn by a generator keyed on the source
  speaker, so each source speaker always gets the same draw.

The two parts are combined either by scaling each part and concatenating
(``weighted-concat``, output dimension doubles) or by a weighted sum
(``weighted-sum``, dimension unchanged).
"""

from __future__ import annotations

import enum
import hashlib
import logging
from dataclasses import dataclass

import numpy as np

from .errors import ContractError

logger = logging.getLogger(__name__)

PSEUDO_ID = "__pseudo__"

#: (w_pseudo, w_avg) for the four target-EER conditions, weakest first.
CHALLENGE_WEIGHTS = ((0.6, 0.4), (0.8, 0.2), (0.9, 0.1), (0.95, 0.05))

_U64 = 2**64


class Mode(str, enum.Enum):
    CONCAT = "weighted-concat"
    SUM = "weighted-sum"


@dataclass(frozen=True, eq=False)
class SpeakerLUT:
    """Immutable table of speaker embeddings.

    ``ids`` lists the real speakers in table order followed by ``pseudo_id``;
    ``table`` has one row per entry of ``ids``.
    """

    dim: int
    ids: tuple
    table: np.ndarray
    init_seed: int
    pseudo_id: str = PSEUDO_ID

    def __post_init__(self):
        table = np.array(self.table, dtype=np.float64, copy=True)
        if self.dim <= 0:
            raise ContractError(f"dim must be positive, got {self.dim}")
        if table.ndim != 2 or table.shape != (len(self.ids), self.dim):
            raise ContractError(
                f"table shape {table.shape} does not match {len(self.ids)} ids x dim {self.dim}"
            )
        if not np.all(np.isfinite(table)):
            raise ContractError("LUT contains non-finite values")
        if not self.ids or self.ids[-1] != self.pseudo_id:
            raise ContractError(f"last LUT row must be the pseudo speaker {self.pseudo_id!r}")
        if self.pseudo_id in self.ids[:-1]:
            raise ContractError(f"pseudo id {self.pseudo_id!r} also used as a real speaker id")
        table.flags.writeable = False
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.ids)})
        if len(self._index) != len(self.ids):
            raise ContractError("duplicate speaker ids in LUT")

    @property
    def real_ids(self):
        return self.ids[:-1]

    @property
    def n_real(self):
        return len(self.ids) - 1

    @property
    def pseudo(self):
        return self.table[-1]

    def index(self, speaker_id):
        try:
            return self._index[speaker_id]
        except KeyError:
            raise ContractError(f"unknown speaker id {speaker_id!r}") from None

    def embedding(self, speaker_id):
        return self.table[self.index(speaker_id)]

    def __len__(self):
        return len(self.ids)

    def __eq__(self, other):
        if not isinstance(other, SpeakerLUT):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.ids == other.ids
            and self.init_seed == other.init_seed
            and self.pseudo_id == other.pseudo_id
            and self.table.tobytes() == other.table.tobytes()
        )

    __hash__ = None


def build_lut(speaker_ids, dim, init_seed):
    """Build a LUT with i.i.d. standard-normal rows.

    Rows are drawn in ``speaker_ids`` order and the pseudo row is drawn last
    from the same distribution, so a given ``(speaker_ids, dim, init_seed)``
    always produces the same table.
    """
    speaker_ids = list(speaker_ids)
    if not speaker_ids:
        raise ContractError("speaker_ids must be non-empty")
    if dim <= 0:
        raise ContractError(f"dim must be positive, got {dim}")
    seen = set()
    for sid in speaker_ids:
        if not isinstance(sid, str) or not sid or any(c.isspace() for c in sid):
            raise ContractError(f"invalid speaker id {sid!r}")
        if sid == PSEUDO_ID:
            raise ContractError(f"speaker id {PSEUDO_ID!r} is reserved for the pseudo speaker")
        if sid in seen:
            raise ContractError(f"duplicate speaker id {sid!r}")
        seen.add(sid)
    rng = np.random.default_rng(int(init_seed) % _U64)
    table = rng.standard_normal((len(speaker_ids) + 1, dim))
    return SpeakerLUT(dim=dim, ids=tuple(speaker_ids) + (PSEUDO_ID,), table=table,
                      init_seed=int(init_seed))


@dataclass(frozen=True)
class AnonymizationConfig:
    k: int = 10
    w_pseudo: float = 0.6
    w_avg: float = 0.4
    mode: Mode = Mode.CONCAT
    selection_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if int(self.k) != self.k or self.k < 1:
            raise ContractError(f"k must be a positive integer, got {self.k}")
        for name in ("w_pseudo", "w_avg"):
            w = getattr(self, name)
            if not 0.0 <= w <= 1.0:
                raise ContractError(f"{name} must lie in [0, 1], got {w}")
        if abs(self.w_pseudo + self.w_avg - 1.0) > 1e-12:
            raise ContractError(
                f"w_pseudo + w_avg must equal 1, got {self.w_pseudo} + {self.w_avg}"
            )

    @classmethod
    def for_weight(cls, w_pseudo, **kwargs):
        """Config with ``w_avg = 1 - w_pseudo``."""
        return cls(w_pseudo=w_pseudo, w_avg=1.0 - w_pseudo, **kwargs)

    def output_dim(self, dim):
        return 2 * dim if self.mode is Mode.CONCAT else dim


def challenge_conditions(**kwargs):
    """The four standard weight conditions as configs, sharing any extra settings."""
    return [AnonymizationConfig(w_pseudo=wp, w_avg=wa, **kwargs) for wp, wa in CHALLENGE_WEIGHTS]


def _speaker_key(speaker_id):
    digest = hashlib.blake2b(speaker_id.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def selection_indices(lut, source_speaker, cfg):
    """Row indices (sorted, into ``lut.table``) averaged for ``source_speaker``.

    Only real rows ``0 .. n_real-1`` can be drawn; the pseudo row is the last
    row and lies outside the sampled range.
    """
    lut.index(source_speaker)
    if lut.pseudo_id == source_speaker:
        raise ContractError("the pseudo speaker cannot be anonymized")
    if cfg.k > lut.n_real:
        raise ContractError(f"k={cfg.k} exceeds the {lut.n_real} real speakers in the LUT")
    rng = np.random.default_rng([int(cfg.selection_seed) % _U64, _speaker_key(source_speaker)])
    return np.sort(rng.choice(lut.n_real, size=cfg.k, replace=False))


def selected_speakers(lut, source_speaker, cfg):
    return [lut.ids[i] for i in selection_indices(lut, source_speaker, cfg)]


def averaged_embedding(lut, source_speaker, cfg):
    idx = selection_indices(lut, source_speaker, cfg)
    return lut.table[idx].mean(axis=0)


def anonymized_embedding(lut, source_speaker, cfg):
    avg = averaged_embedding(lut, source_speaker, cfg)
    pseudo = lut.pseudo
    if cfg.mode is Mode.CONCAT:
        return np.concatenate([cfg.w_pseudo * pseudo, cfg.w_avg * avg])
    return cfg.w_pseudo * pseudo + cfg.w_avg * avg
