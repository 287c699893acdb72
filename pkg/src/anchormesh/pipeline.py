"""Encode/decode orchestration for one frame pair.

The encoder chains anchor generation, subdivision, displacement extraction
and quantization; the decoder reverses it from the payload plus the shared
reference base mesh. Both sides are deterministic, so identical inputs give
byte-identical payloads and reconstructions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .coarse import AnchorMesh, generate_coarse_anchor
from .config import CodecConfig
from .mesh import TriangleMesh
from .octree import build_octree
from .payload import Payload, PayloadFormatError, BaseHashMismatchError, mesh_content_hash
from .qem import refine_anchor
from .quantize import (
    QuantizationParams,
    QuantizedDisplacementField,
    adaptive_weights,
    dequantize_field,
    neighbor_counts,
    quantize_field,
)
from .subdivide import (
    DisplacementField,
    SubdividedMesh,
    apply_displacements,
    compute_displacements,
    midpoint_subdivide,
)


@dataclass
class EncodeResult:
    payload: Payload
    anchor: AnchorMesh
    subdivided: SubdividedMesh
    field: DisplacementField
    quantized: QuantizedDisplacementField
    stats: dict


def encode_pair(base: TriangleMesh, target: TriangleMesh,
                config: CodecConfig = CodecConfig()) -> EncodeResult:
    """Encode ``target`` against the reference base mesh ``base``."""
    stats = {}
    t0 = time.perf_counter()
    index = build_octree(target.vertices, config.leaf_capacity, config.max_depth)
    stats["octree_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    coarse, _ = generate_coarse_anchor(base, target, index,
                                       motion_estimation=config.motion_estimation)
    stats["coarse_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    anchor = refine_anchor(coarse, target, config.collapses_per_anchor) \
        if config.qem_refine else coarse
    stats["fine_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    sub = midpoint_subdivide(anchor.mesh, config.level)
    field = compute_displacements(sub, target)
    stats["displace_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    counts = neighbor_counts(sub.mesh)
    params = QuantizationParams(config.alpha, config.delta, config.hbar)
    quantized = quantize_field(field, counts, params, adaptive=config.adaptive_quant)
    stats["quantize_s"] = time.perf_counter() - t0

    payload = Payload(
        base_hash=mesh_content_hash(base),
        anchor_positions=anchor.mesh.vertices,
        level=config.level,
        params=params,
        adaptive=config.adaptive_quant,
        quantized=quantized.values,
    )
    stats["anchor_vertices"] = base.n_vertices
    stats["subdivided_vertices"] = sub.mesh.n_vertices
    return EncodeResult(payload, anchor, sub, field, quantized, stats)


def decode_payload(payload: Payload, base: TriangleMesh) -> TriangleMesh:
    """Reconstruct the coded frame from a payload and its base mesh."""
    if payload.base_hash != mesh_content_hash(base):
        raise BaseHashMismatchError("payload was encoded against a different base mesh")
    if len(payload.anchor_positions) != base.n_vertices:
        raise PayloadFormatError("anchor vertex count does not match the base mesh")
    anchor_mesh = TriangleMesh(payload.anchor_positions, base.faces)
    sub = midpoint_subdivide(anchor_mesh, payload.level)
    if len(payload.quantized) != sub.mesh.n_vertices:
        raise PayloadFormatError(
            f"displacement stream holds {len(payload.quantized)} triples, "
            f"expected {sub.mesh.n_vertices}"
        )
    counts = neighbor_counts(sub.mesh)
    if payload.adaptive:
        weights = adaptive_weights(counts, payload.params.hbar)
    else:
        weights = np.ones(sub.mesh.n_vertices)
    quantized = QuantizedDisplacementField(payload.quantized, payload.params,
                                           weights, payload.level)
    return apply_displacements(sub, dequantize_field(quantized))
