"""Forward kernels for frequency-dynamic convolution and SE gating.

A frequency-dynamic convolution evaluates, at every output frequency f, a
3x3 convolution whose kernel is an attention-weighted mixture of K basis
kernels.  Because convolution is linear in the kernel, the fast path runs
one (frequency-dilated) convolution per basis and mixes the outputs; the
naive oracle instead assembles the mixed kernel densely at each frequency
and slides it by hand.  Both must agree to floating tolerance.

Kernels are fixed at 3x3.  Dilation applies to the frequency axis of the
kernel only; the time axis always uses dilation 1.  Outputs keep the input
shape via zero padding (time pad 1, frequency pad equal to each basis
kernel's dilation).  Inference only: weights are loaded from files or drawn
randomly for testing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "AttentionParams",
    "BasisKernelBank",
    "PartialConvConfig",
    "SEParams",
    "TwoLayerGate",
    "fdy_forward",
    "freq_attention",
    "load_conv_weights",
    "naive_oracle_forward",
    "pfd_forward",
    "random_attention",
    "random_bank",
    "random_partial_config",
    "random_se_params",
    "save_conv_weights",
    "se_forward",
    "tfwse_forward",
]

KERNEL_SIZE = 3
DEFAULT_TEMPERATURE = 31.0


def _check_finite(name: str, a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if not np.isfinite(a).all():
        raise ValueError(f"{name} must be finite")
    return a


@dataclass(frozen=True, eq=False)
class BasisKernelBank:
    """K basis 3x3 kernels with per-basis frequency dilation and bias."""

    kernels: np.ndarray  # (K, C_dyn, C_in, 3, 3)
    biases: np.ndarray  # (K, C_dyn)
    freq_dilations: tuple[int, ...]

    def __post_init__(self) -> None:
        kernels = _check_finite("kernels", self.kernels)
        biases = _check_finite("biases", self.biases)
        if kernels.ndim != 5 or kernels.shape[3:] != (KERNEL_SIZE, KERNEL_SIZE):
            raise ValueError("kernels must have shape (K, C_dyn, C_in, 3, 3)")
        if kernels.shape[0] < 1:
            raise ValueError("need at least one basis kernel")
        if biases.shape != kernels.shape[:2]:
            raise ValueError("biases must have shape (K, C_dyn)")
        if len(self.freq_dilations) != kernels.shape[0]:
            raise ValueError("one frequency dilation per basis kernel")
        if any(d < 1 for d in self.freq_dilations):
            raise ValueError("frequency dilations must be >= 1")
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "biases", biases)
        object.__setattr__(self, "freq_dilations", tuple(int(d) for d in self.freq_dilations))

    @property
    def num_basis(self) -> int:
        return self.kernels.shape[0]

    @property
    def out_channels(self) -> int:
        return self.kernels.shape[1]

    @property
    def in_channels(self) -> int:
        return self.kernels.shape[2]


@dataclass(frozen=True, eq=False)
class AttentionParams:
    """Two-layer frequency attention over basis kernels.

    Squeeze is a time average per (channel, frequency); the MLP is applied
    pointwise per frequency and softmaxed over the basis axis with a
    temperature.
    """

    w1: np.ndarray  # (C_att, C_in)
    b1: np.ndarray  # (C_att,)
    w2: np.ndarray  # (K, C_att)
    b2: np.ndarray  # (K,)
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self) -> None:
        w1 = _check_finite("w1", self.w1)
        b1 = _check_finite("b1", self.b1)
        w2 = _check_finite("w2", self.w2)
        b2 = _check_finite("b2", self.b2)
        if w1.ndim != 2 or b1.shape != (w1.shape[0],):
            raise ValueError("w1 must be (C_att, C_in) with matching b1")
        if w2.ndim != 2 or w2.shape[1] != w1.shape[0] or b2.shape != (w2.shape[0],):
            raise ValueError("w2 must be (K, C_att) with matching b2")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        for name, a in (("w1", w1), ("b1", b1), ("w2", w2), ("b2", b2)):
            object.__setattr__(self, name, a)

    @property
    def num_basis(self) -> int:
        return self.w2.shape[0]


@dataclass(frozen=True, eq=False)
class TwoLayerGate:
    """linear -> ReLU -> linear, squashed by a sigmoid at the call site."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self) -> None:
        w1 = _check_finite("w1", self.w1)
        b1 = _check_finite("b1", self.b1)
        w2 = _check_finite("w2", self.w2)
        b2 = _check_finite("b2", self.b2)
        if w1.ndim != 2 or b1.shape != (w1.shape[0],):
            raise ValueError("w1 must be (hidden, n) with matching b1")
        if w2.shape != (w1.shape[1], w1.shape[0]) or b2.shape != (w2.shape[0],):
            raise ValueError("w2 must be (n, hidden) with matching b2")
        for name, a in (("w1", w1), ("b1", b1), ("w2", w2), ("b2", b2)):
            object.__setattr__(self, name, a)


@dataclass(frozen=True, eq=False)
class SEParams:
    """Squeeze-excitation parameter pair: channel gate and tfw gate."""

    channel_gate: TwoLayerGate  # C -> C/r -> C
    tfw_gate: TwoLayerGate  # F -> F/r -> F


@dataclass(frozen=True, eq=False)
class PartialConvConfig:
    """Static 3x3 branch of a partially dynamic convolution.

    ``proportion`` is the fraction of output channels produced by the
    dynamic branch; the remaining channels come from this static kernel.
    """

    proportion: float
    static_kernel: np.ndarray  # (C_static, C_in, 3, 3)
    static_bias: np.ndarray  # (C_static,)

    def __post_init__(self) -> None:
        if not 0.0 <= self.proportion <= 1.0:
            raise ValueError("proportion must lie in [0, 1]")
        kernel = _check_finite("static_kernel", self.static_kernel)
        bias = _check_finite("static_bias", self.static_bias)
        if kernel.ndim != 4 or kernel.shape[2:] != (KERNEL_SIZE, KERNEL_SIZE):
            raise ValueError("static_kernel must have shape (C_static, C_in, 3, 3)")
        if bias.shape != (kernel.shape[0],):
            raise ValueError("static_bias must have shape (C_static,)")
        object.__setattr__(self, "static_kernel", kernel)
        object.__setattr__(self, "static_bias", bias)

    @property
    def static_channels(self) -> int:
        return self.static_kernel.shape[0]


def _check_feature(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError("feature must have shape (channels, time, freq)")
    return x


def _softmax(logits: np.ndarray, axis: int) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def freq_attention(x: np.ndarray, params: AttentionParams) -> np.ndarray:
    """Per-frequency attention weights over the K basis kernels.

    Returns a (K, F) matrix whose columns sum to 1.
    """
    x = _check_feature(x)
    if x.shape[0] != params.w1.shape[1]:
        raise ValueError(
            f"input has {x.shape[0]} channels, attention expects {params.w1.shape[1]}"
        )
    squeezed = x.mean(axis=1)  # (C_in, F)
    hidden = np.maximum(params.w1 @ squeezed + params.b1[:, None], 0.0)
    logits = params.w2 @ hidden + params.b2[:, None]
    return _softmax(logits / params.temperature, axis=0)


def _conv3x3_same(
    x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, freq_dilation: int
) -> np.ndarray:
    """3x3 convolution, zero padded to keep shape; dilated along frequency."""
    c_in, n_frames, n_bins = x.shape
    if kernel.shape[1] != c_in:
        raise ValueError(f"kernel expects {kernel.shape[1]} input channels, got {c_in}")
    if freq_dilation > n_bins:
        raise ValueError(
            f"frequency dilation {freq_dilation} exceeds the {n_bins} available bins"
        )
    padded = np.pad(x, ((0, 0), (1, 1), (freq_dilation, freq_dilation)))
    out = np.zeros((kernel.shape[0], n_frames, n_bins))
    for i in range(KERNEL_SIZE):
        for j in range(KERNEL_SIZE):
            window = padded[
                :,
                i : i + n_frames,
                j * freq_dilation : j * freq_dilation + n_bins,
            ]
            out += np.einsum("oc,ctf->otf", kernel[:, :, i, j], window)
    return out + bias[:, None, None]


def _check_attention_matrix(att: np.ndarray, num_basis: int, n_bins: int) -> np.ndarray:
    att = np.asarray(att, dtype=np.float64)
    if att.shape != (num_basis, n_bins):
        raise ValueError(f"attention must have shape ({num_basis}, {n_bins})")
    if not np.allclose(att.sum(axis=0), 1.0, atol=1e-6):
        raise ValueError("attention columns must sum to 1")
    return att


def fdy_forward(x: np.ndarray, bank: BasisKernelBank, att: np.ndarray) -> np.ndarray:
    """Frequency-dynamic convolution via per-basis convolutions.

    out[:, t, f] = sum_k att[k, f] * conv(x; kernel_k, bias_k, dilation d_k),
    which by linearity equals convolving with the per-frequency assembled
    kernel sum_k att[k, f] * W_k.
    """
    x = _check_feature(x)
    if x.shape[0] != bank.in_channels:
        raise ValueError(f"input has {x.shape[0]} channels, bank expects {bank.in_channels}")
    att = _check_attention_matrix(att, bank.num_basis, x.shape[2])
    out = np.zeros((bank.out_channels, x.shape[1], x.shape[2]))
    for k in range(bank.num_basis):
        basis_out = _conv3x3_same(x, bank.kernels[k], bank.biases[k], bank.freq_dilations[k])
        out += att[k][None, None, :] * basis_out
    return out


def naive_oracle_forward(x: np.ndarray, bank: BasisKernelBank, att: np.ndarray) -> np.ndarray:
    """Reference forward pass: assemble the mixed kernel densely per frequency.

    Deliberately written as explicit sliding-window loops with no algebraic
    shortcuts, to serve as an independent oracle for fdy_forward.
    """
    x = _check_feature(x)
    if x.shape[0] != bank.in_channels:
        raise ValueError(f"input has {x.shape[0]} channels, bank expects {bank.in_channels}")
    c_in, n_frames, n_bins = x.shape
    att = _check_attention_matrix(att, bank.num_basis, n_bins)
    for d in bank.freq_dilations:
        if d > n_bins:
            raise ValueError(f"frequency dilation {d} exceeds the {n_bins} available bins")
    c_out = bank.out_channels
    max_d = max(bank.freq_dilations)
    span = 2 * max_d + 1
    out = np.zeros((c_out, n_frames, n_bins))
    for f in range(n_bins):
        # Dense assembled kernel at this frequency: (C_out, C_in, 3, span).
        assembled = np.zeros((c_out, c_in, KERNEL_SIZE, span))
        assembled_bias = np.zeros(c_out)
        for k in range(bank.num_basis):
            weight = att[k, f]
            dilation = bank.freq_dilations[k]
            for j in range(KERNEL_SIZE):
                assembled[:, :, :, max_d + (j - 1) * dilation] += weight * bank.kernels[k][:, :, :, j]
            assembled_bias += weight * bank.biases[k]
        for t in range(n_frames):
            for co in range(c_out):
                acc = assembled_bias[co]
                for ci in range(c_in):
                    for i in range(KERNEL_SIZE):
                        ti = t + i - 1
                        if ti < 0 or ti >= n_frames:
                            continue
                        for jj in range(span):
                            fj = f + jj - max_d
                            if fj < 0 or fj >= n_bins:
                                continue
                            acc += assembled[co, ci, i, jj] * x[ci, ti, fj]
                out[co, t, f] = acc
    return out


def pfd_forward(
    x: np.ndarray,
    cfg: PartialConvConfig,
    bank: BasisKernelBank | None,
    att_params: AttentionParams | None,
) -> np.ndarray:
    """Partially dynamic convolution: static channels then dynamic channels.

    The dynamic branch carries round(proportion * C_out) output channels;
    mixed per-basis dilations make this the partial dilated variant.
    """
    x = _check_feature(x)
    dynamic_channels = bank.out_channels if bank is not None else 0
    total = cfg.static_channels + dynamic_channels
    if total == 0:
        raise ValueError("no output channels configured")
    expected_dynamic = int(round(cfg.proportion * total))
    if expected_dynamic != dynamic_channels:
        raise ValueError(
            f"proportion {cfg.proportion} of {total} output channels implies "
            f"{expected_dynamic} dynamic channels, bank provides {dynamic_channels}"
        )
    if expected_dynamic == 0 and bank is not None:
        raise ValueError("proportion yields zero dynamic channels but a bank was supplied")
    parts: list[np.ndarray] = []
    if cfg.static_channels > 0:
        parts.append(_conv3x3_same(x, cfg.static_kernel, cfg.static_bias, 1))
    if bank is not None:
        if att_params is None:
            raise ValueError("attention parameters are required with a kernel bank")
        att = freq_attention(x, att_params)
        parts.append(fdy_forward(x, bank, att))
    return np.concatenate(parts, axis=0)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    expx = np.exp(x[~pos])
    out[~pos] = expx / (1.0 + expx)
    return out


def _gate_logits(gate: TwoLayerGate, v: np.ndarray) -> np.ndarray:
    hidden = np.maximum(gate.w1 @ v + gate.b1, 0.0)
    return gate.w2 @ hidden + gate.b2


def se_forward(x: np.ndarray, params: SEParams) -> np.ndarray:
    """Channel squeeze-excitation: one sigmoid gate per channel."""
    x = _check_feature(x)
    gate_mlp = params.channel_gate
    if gate_mlp.w1.shape[1] != x.shape[0]:
        raise ValueError(f"channel gate expects {gate_mlp.w1.shape[1]} channels")
    squeezed = x.mean(axis=(1, 2))
    gate = _sigmoid(_gate_logits(gate_mlp, squeezed))
    return gate[:, None, None] * x


def tfwse_forward(x: np.ndarray, params: SEParams) -> np.ndarray:
    """Time-frame frequency-wise SE: one gate per (frame, frequency bin).

    Each frame is squeezed over channels into a frequency vector and passed
    through the shared F -> F/r -> F gate MLP.
    """
    x = _check_feature(x)
    gate_mlp = params.tfw_gate
    if gate_mlp.w1.shape[1] != x.shape[2]:
        raise ValueError(f"tfw gate expects {gate_mlp.w1.shape[1]} frequency bins")
    squeezed = x.mean(axis=0)  # (T, F)
    hidden = np.maximum(squeezed @ gate_mlp.w1.T + gate_mlp.b1, 0.0)
    gate = _sigmoid(hidden @ gate_mlp.w2.T + gate_mlp.b2)  # (T, F)
    return x * gate[None, :, :]


def default_attention_hidden(c_in: int) -> int:
    return max(c_in // 4, 4)


def random_bank(
    rng: np.random.Generator,
    num_basis: int,
    out_channels: int,
    in_channels: int,
    freq_dilations: tuple[int, ...],
    scale: float = 0.5,
) -> BasisKernelBank:
    kernels = rng.normal(0.0, scale, size=(num_basis, out_channels, in_channels, 3, 3))
    biases = rng.normal(0.0, scale, size=(num_basis, out_channels))
    return BasisKernelBank(kernels, biases, tuple(freq_dilations))


def random_attention(
    rng: np.random.Generator,
    in_channels: int,
    num_basis: int,
    hidden: int | None = None,
    temperature: float = DEFAULT_TEMPERATURE,
    scale: float = 1.0,
) -> AttentionParams:
    hidden = default_attention_hidden(in_channels) if hidden is None else hidden
    return AttentionParams(
        rng.normal(0.0, scale, size=(hidden, in_channels)),
        rng.normal(0.0, scale, size=hidden),
        rng.normal(0.0, scale, size=(num_basis, hidden)),
        rng.normal(0.0, scale, size=num_basis),
        temperature,
    )


def random_partial_config(
    rng: np.random.Generator,
    proportion: float,
    out_channels: int,
    in_channels: int,
    scale: float = 0.5,
) -> tuple[PartialConvConfig, int]:
    """Static branch sized so the dynamic branch gets round(p * C_out) channels."""
    dynamic = int(round(proportion * out_channels))
    static = out_channels - dynamic
    cfg = PartialConvConfig(
        proportion,
        rng.normal(0.0, scale, size=(static, in_channels, 3, 3)),
        rng.normal(0.0, scale, size=static),
    )
    return cfg, dynamic


def random_se_params(
    rng: np.random.Generator,
    channels: int,
    freq_bins: int,
    reduction: int = 4,
    scale: float = 1.0,
) -> SEParams:
    def gate(n: int) -> TwoLayerGate:
        hidden = max(1, n // reduction)
        return TwoLayerGate(
            rng.normal(0.0, scale, size=(hidden, n)),
            rng.normal(0.0, scale, size=hidden),
            rng.normal(0.0, scale, size=(n, hidden)),
            rng.normal(0.0, scale, size=n),
        )

    return SEParams(gate(channels), gate(freq_bins))


def save_conv_weights(
    json_path: str | Path,
    bank: BasisKernelBank,
    att_params: AttentionParams,
    partial: PartialConvConfig | None = None,
) -> None:
    """Write weights as a flat little-endian float64 blob plus a JSON sidecar."""
    json_path = Path(json_path)
    tensors: list[tuple[str, np.ndarray]] = [
        ("kernels", bank.kernels),
        ("biases", bank.biases),
        ("att_w1", att_params.w1),
        ("att_b1", att_params.b1),
        ("att_w2", att_params.w2),
        ("att_b2", att_params.b2),
    ]
    meta: dict = {
        "dtype": "float64",
        "byte_order": "little",
        "data_file": json_path.with_suffix(".bin").name,
        "freq_dilations": list(bank.freq_dilations),
        "temperature": att_params.temperature,
        "tensors": [],
    }
    if partial is not None:
        tensors.append(("static_kernel", partial.static_kernel))
        tensors.append(("static_bias", partial.static_bias))
        meta["proportion"] = partial.proportion
    blob = bytearray()
    for name, tensor in tensors:
        meta["tensors"].append({"name": name, "shape": list(tensor.shape)})
        blob.extend(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
    json_path.parent.mkdir(parents=True, exist_ok=True)
    (json_path.parent / meta["data_file"]).write_bytes(bytes(blob))
    json_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_conv_weights(
    json_path: str | Path,
) -> tuple[BasisKernelBank, AttentionParams, PartialConvConfig | None]:
    json_path = Path(json_path)
    meta = json.loads(json_path.read_text(encoding="utf-8"))
    raw = (json_path.parent / meta["data_file"]).read_bytes()
    flat = np.frombuffer(raw, dtype="<f8")
    tensors: dict[str, np.ndarray] = {}
    cursor = 0
    for entry in meta["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        tensors[entry["name"]] = flat[cursor : cursor + count].reshape(shape)
        cursor += count
    if cursor != flat.size:
        raise ValueError(f"{json_path}: weight blob size does not match the sidecar")
    bank = BasisKernelBank(
        tensors["kernels"], tensors["biases"], tuple(meta["freq_dilations"])
    )
    att = AttentionParams(
        tensors["att_w1"],
        tensors["att_b1"],
        tensors["att_w2"],
        tensors["att_b2"],
        float(meta.get("temperature", DEFAULT_TEMPERATURE)),
    )
    partial = None
    if "static_kernel" in tensors:
        partial = PartialConvConfig(
            float(meta["proportion"]), tensors["static_kernel"], tensors["static_bias"]
        )
    return bank, att, partial
