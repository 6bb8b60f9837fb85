"""A small encoder-decoder wrapped around the extraction gate.

One self-attention + feed-forward block on each side with learned positional
embeddings and a shared token embedding. The decoder has no cross-attention
block of its own: every bit of source information reaches the output through
the gate layer, which makes the copy-versus-generate split observable.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tensor, add, log, matmul, mul, relu, softmax, take_rows, tmean, tsum
from .layers import GateActivations, GateParams, run_gate

PARAMS_FORMAT_VERSION = 1
_LOG_FLOOR = 1e-12
_MASK_OFF = -1e9


@dataclass(frozen=True)
class GateConfig:
    """Model dimensions and the run seed."""

    vocab_size: int
    d_model: int
    max_src_len: int
    max_tgt_len: int
    start_id: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be at least 2")
        for name in ("d_model", "max_src_len", "max_tgt_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.start_id < self.vocab_size:
            raise ValueError("start_id must be a vocabulary id")


@dataclass(frozen=True)
class ForwardPass:
    """Teacher-forced pass: activations plus the training loss."""

    activations: GateActivations
    per_position_loss: np.ndarray
    loss: float
    loss_tensor: Tensor = field(repr=False)


class GateModel:
    """Encoder-decoder with a gated extraction output layer.

    ``gated=False`` forces the copy probability to zero (the ablation); the
    architecture and parameter count stay identical so the two variants are
    directly comparable.
    """

    def __init__(self, cfg: GateConfig, gated: bool = True):
        self.cfg = cfg
        self.gated = gated
        self.params: dict[str, Tensor] = {}
        self._init_params(np.random.default_rng(cfg.seed))

    # ------------------------------------------------------------------
    # Parameters

    def _add_param(self, name: str, data: np.ndarray):
        self.params[name] = Tensor(data, requires_grad=True)

    def _init_params(self, rng: np.random.Generator):
        cfg = self.cfg
        d, v = cfg.d_model, cfg.vocab_size

        def norm(*shape):
            return rng.normal(0.0, shape[0] ** -0.5, size=shape)

        self._add_param("emb", rng.normal(0.0, d**-0.5, size=(v, d)))
        self._add_param("pos_src", rng.normal(0.0, d**-0.5, size=(cfg.max_src_len, d)))
        self._add_param("pos_tgt", rng.normal(0.0, d**-0.5, size=(cfg.max_tgt_len, d)))
        for side in ("enc", "dec"):
            for proj in ("wq", "wk", "wv", "wo"):
                self._add_param(f"{side}.{proj}", norm(d, d))
            self._add_param(f"{side}.ff_w1", norm(d, 2 * d))
            self._add_param(f"{side}.ff_b1", np.zeros(2 * d))
            self._add_param(f"{side}.ff_w2", norm(2 * d, d))
            self._add_param(f"{side}.ff_b2", np.zeros(d))
        self._add_param("gate.w_q", norm(d, d))
        self._add_param("gate.w_kv", norm(d, d))
        self._add_param("gate.ff_w", norm(d, d))
        self._add_param("gate.ff_b", np.zeros(d))
        for part in ("dec", "ctx"):
            self._add_param(f"gate.ln_{part}_gain", np.ones(d))
            self._add_param(f"gate.ln_{part}_bias", np.zeros(d))
        self._add_param("gate.gate_w", norm(2 * d, 1))
        self._add_param("gate.gate_b", np.zeros(1))
        self._add_param("gate.out_w", norm(d, v))
        self._add_param("gate.out_b", np.zeros(v))

    def gate_params(self) -> GateParams:
        p = self.params
        return GateParams(
            w_q=p["gate.w_q"],
            w_kv=p["gate.w_kv"],
            ff_w=p["gate.ff_w"],
            ff_b=p["gate.ff_b"],
            ln_dec_gain=p["gate.ln_dec_gain"],
            ln_dec_bias=p["gate.ln_dec_bias"],
            ln_ctx_gain=p["gate.ln_ctx_gain"],
            ln_ctx_bias=p["gate.ln_ctx_bias"],
            gate_w=p["gate.gate_w"],
            gate_b=p["gate.gate_b"],
            out_w=p["gate.out_w"],
            out_b=p["gate.out_b"],
        )

    def gate_param_names(self) -> list[str]:
        return sorted(n for n in self.params if n.startswith("gate."))

    def num_params(self) -> int:
        return sum(t.data.size for t in self.params.values())

    # ------------------------------------------------------------------
    # Forward

    def _check_ids(self, ids: np.ndarray, limit: int, name: str) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.ndim != 1 or ids.size == 0:
            raise ValueError(f"{name} must be a non-empty flat id sequence")
        if ids.size > limit:
            raise ValueError(f"{name} longer than the configured maximum ({ids.size} > {limit})")
        if ids.min() < 0 or ids.max() >= self.cfg.vocab_size:
            raise ValueError(f"{name} out of vocabulary range")
        return ids

    def _block(self, x: Tensor, side: str, mask: np.ndarray | None) -> Tensor:
        p = self.params
        scale = self.cfg.d_model**-0.5
        q = matmul(x, p[f"{side}.wq"])
        k = matmul(x, p[f"{side}.wk"])
        v = matmul(x, p[f"{side}.wv"])
        score = mul(matmul(q, _t(k)), Tensor(scale))
        if mask is not None:
            score = add(score, Tensor(mask))
        attended = matmul(matmul(softmax(score), v), p[f"{side}.wo"])
        h = add(x, attended)
        ff = matmul(relu(add(matmul(h, p[f"{side}.ff_w1"]), p[f"{side}.ff_b1"])), p[f"{side}.ff_w2"])
        return add(h, add(ff, p[f"{side}.ff_b2"]))

    def _encode(self, src_ids: np.ndarray) -> Tensor:
        x = add(take_rows(self.params["emb"], src_ids), take_rows(self.params["pos_src"], np.arange(src_ids.size)))
        return self._block(x, "enc", None)

    def _decode_states(self, dec_in: np.ndarray) -> Tensor:
        n = dec_in.size
        x = add(take_rows(self.params["emb"], dec_in), take_rows(self.params["pos_tgt"], np.arange(n)))
        mask = np.triu(np.full((n, n), _MASK_OFF), k=1)
        return self._block(x, "dec", mask)

    def _graph(self, src_ids: np.ndarray, dec_in: np.ndarray) -> tuple[dict, GateActivations]:
        h_enc = self._encode(src_ids)
        h_dec = self._decode_states(dec_in)
        return run_gate(h_enc, h_dec, src_ids, self.gate_params(), p_ext_scale=1.0 if self.gated else 0.0)

    def forward(self, src_ids, tgt_ids) -> ForwardPass:
        """Teacher-forced pass with per-position negative log likelihood."""
        src_ids = self._check_ids(src_ids, self.cfg.max_src_len, "src_ids")
        tgt_ids = self._check_ids(tgt_ids, self.cfg.max_tgt_len, "tgt_ids")
        dec_in = np.concatenate([[self.cfg.start_id], tgt_ids[:-1]])
        tensors, snapshot = self._graph(src_ids, dec_in)
        onehot = np.zeros((tgt_ids.size, self.cfg.vocab_size))
        onehot[np.arange(tgt_ids.size), tgt_ids] = 1.0
        picked = tsum(mul(tensors["o_final"], Tensor(onehot)), axis=-1)
        nll = mul(log(add(picked, Tensor(_LOG_FLOOR))), Tensor(-1.0))
        loss = tmean(nll)
        return ForwardPass(
            activations=snapshot,
            per_position_loss=nll.data.copy(),
            loss=float(loss.data),
            loss_tensor=loss,
        )

    def loss_and_grads(self, src_ids, tgt_ids) -> tuple[float, dict[str, np.ndarray]]:
        """One backward pass; gradients are returned, not stored."""
        for t in self.params.values():
            t.grad = None
        fp = self.forward(src_ids, tgt_ids)
        fp.loss_tensor.backward()
        grads = {name: (np.zeros_like(t.data) if t.grad is None else t.grad.copy()) for name, t in self.params.items()}
        return fp.loss, grads

    def sgd_step(self, grads: dict[str, np.ndarray], lr: float):
        for name, t in self.params.items():
            t.data = t.data - lr * grads[name]

    def decode_greedy(self, src_ids, n_steps: int) -> list[int]:
        """Argmax decoding for a fixed number of steps."""
        src_ids = self._check_ids(src_ids, self.cfg.max_src_len, "src_ids")
        if not 1 <= n_steps <= self.cfg.max_tgt_len:
            raise ValueError("n_steps must fit the configured target length")
        out: list[int] = []
        for _ in range(n_steps):
            dec_in = np.asarray([self.cfg.start_id] + out, dtype=np.int64)
            tensors, _ = self._graph(src_ids, dec_in)
            out.append(int(np.argmax(tensors["o_final"].data[-1])))
        return out


def _t(a: Tensor) -> Tensor:
    out = Tensor(a.data.T, _parents=(a,))

    def backward(o: Tensor):
        if a.requires_grad:
            a._accumulate(o.grad.T)

    out._backward_fn = backward
    return out


# ----------------------------------------------------------------------
# Serialization: a flat float64 blob plus a JSON sidecar describing it.


def _sidecar_path(blob_path: Path) -> Path:
    return blob_path.with_name(blob_path.name + ".json")


def save_params(model: GateModel, blob_path: str | Path) -> Path:
    """Write parameters to ``blob_path`` and a sidecar next to it.

    The sidecar pins the format version, dtype, config, and the name, shape,
    and order of every array in the blob, so a load can verify byte layout.
    """
    blob_path = Path(blob_path)
    names = sorted(model.params)
    arrays = [model.params[n].data for n in names]
    blob = np.concatenate([a.reshape(-1) for a in arrays]).astype(np.float64)
    blob_path.write_bytes(blob.tobytes())
    sidecar = {
        "version": PARAMS_FORMAT_VERSION,
        "dtype": "float64",
        "gated": model.gated,
        "config": asdict(model.cfg),
        "params": [{"name": n, "shape": list(model.params[n].shape)} for n in names],
    }
    path = _sidecar_path(blob_path)
    path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return path


class ParamsFormatError(ValueError):
    """The blob or sidecar does not describe a loadable parameter set."""


def load_params(blob_path: str | Path) -> GateModel:
    """Rebuild a model from a blob written by :func:`save_params`."""
    blob_path = Path(blob_path)
    try:
        sidecar = json.loads(_sidecar_path(blob_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParamsFormatError(f"cannot read sidecar for {blob_path}: {exc}") from exc
    if sidecar.get("version") != PARAMS_FORMAT_VERSION:
        raise ParamsFormatError(f"unsupported params version {sidecar.get('version')!r}")
    if sidecar.get("dtype") != "float64":
        raise ParamsFormatError(f"unsupported dtype {sidecar.get('dtype')!r}")
    try:
        cfg = GateConfig(**sidecar["config"])
        entries = [(e["name"], tuple(int(s) for s in e["shape"])) for e in sidecar["params"]]
    except (KeyError, TypeError) as exc:
        raise ParamsFormatError(f"malformed sidecar: {exc}") from exc
    model = GateModel(cfg, gated=bool(sidecar.get("gated", True)))
    if sorted(n for n, _ in entries) != sorted(model.params):
        raise ParamsFormatError("sidecar parameter names do not match the architecture")
    flat = np.frombuffer(blob_path.read_bytes(), dtype=np.float64)
    expected = sum(int(np.prod(shape)) for _, shape in entries)
    if flat.size != expected:
        raise ParamsFormatError(f"blob holds {flat.size} values, sidecar describes {expected}")
    offset = 0
    for name, shape in entries:
        size = int(np.prod(shape))
        if model.params[name].shape != shape:
            raise ParamsFormatError(f"shape mismatch for {name}: {shape} vs {model.params[name].shape}")
        model.params[name].data = flat[offset : offset + size].reshape(shape).copy()
        offset += size
    return model
