"""Material constants and thin-plate homogenization of layer stacks.

No constants live in this module. Values come from the JSON fixtures shipped
under ``ferrolamb/data`` (or a user-supplied file), so every number that
feeds the dispersion and capacitance models can be swapped for a better
calibration without touching code.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigurationError

FIXTURES_ENV = "FERROLAMB_FIXTURES"


def fixtures_dir() -> Path:
    """Directory holding the JSON/CSV fixtures; overridable via ``FERROLAMB_FIXTURES``."""
    override = os.environ.get(FIXTURES_ENV)
    if override:
        return Path(override)
    return Path(__file__).resolve().parent / "data"


@dataclass(frozen=True)
class ElasticMaterial:
    """Per-layer constants. Stiffness in Pa, density in kg/m^3, e11 in C/m^2."""

    name: str
    density: float
    c11: float
    c12: float
    c44: float
    e11: float = 0.0
    eps11_r: float = 1.0
    provenance: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.density > 0:
            raise ConfigurationError(f"{self.name}: density must be > 0, got {self.density}")
        if not self.c11 > 0:
            raise ConfigurationError(f"{self.name}: c11 must be > 0, got {self.c11}")
        if not self.c11 > abs(self.c12):
            raise ConfigurationError(
                f"{self.name}: plane-stress stiffness not positive definite (c11={self.c11}, c12={self.c12})"
            )
        if not self.c44 > 0:
            raise ConfigurationError(f"{self.name}: c44 must be > 0, got {self.c44}")
        if self.eps11_r < 1:
            raise ConfigurationError(f"{self.name}: eps11_r must be >= 1, got {self.eps11_r}")

    @classmethod
    def from_record(cls, rec: dict) -> "ElasticMaterial":
        try:
            return cls(
                name=rec["name"],
                density=float(rec["density"]),
                c11=float(rec["c11"]),
                c12=float(rec["c12"]),
                c44=float(rec["c44"]),
                e11=float(rec.get("e11", 0.0)),
                eps11_r=float(rec.get("eps11_r", 1.0)),
                provenance=rec.get("provenance", ""),
            )
        except KeyError as exc:
            raise ConfigurationError(f"material record missing field {exc}") from None

    def to_record(self) -> dict:
        return {
            "name": self.name,
            "density": self.density,
            "c11": self.c11,
            "c12": self.c12,
            "c44": self.c44,
            "e11": self.e11,
            "eps11_r": self.eps11_r,
            "provenance": self.provenance,
        }


@dataclass(frozen=True)
class Layer:
    material: ElasticMaterial
    thickness: float
    piezo: bool = False

    def __post_init__(self):
        if not self.thickness > 0:
            raise ConfigurationError(f"layer {self.material.name}: thickness must be > 0")


@dataclass(frozen=True)
class LayerStack:
    """Ordered bottom-to-top layers; exactly one is the transduction layer."""

    layers: tuple[Layer, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ConfigurationError("layer stack needs at least one layer")
        n_piezo = sum(layer.piezo for layer in self.layers)
        if n_piezo != 1:
            raise ConfigurationError(f"exactly one piezoelectric layer required, found {n_piezo}")

    @property
    def piezo_layer(self) -> Layer:
        return next(layer for layer in self.layers if layer.piezo)

    @property
    def total_thickness(self) -> float:
        return sum(layer.thickness for layer in self.layers)


@dataclass(frozen=True)
class EffectivePlate:
    """Homogenized plate.

    ``g_eff`` is the thickness-weighted shear stiffness (c44); the
    Rayleigh-Lamb solver needs it alongside the lateral stiffness.
    """

    total_thickness: float
    rho_eff: float
    c_eff: float
    g_eff: float
    eps_eff_r: float


def plane_stress_stiffness(m: ElasticMaterial) -> float:
    """Lateral stiffness with the out-of-plane stress relaxed: c11 - c12**2 / c11."""
    return m.c11 - m.c12**2 / m.c11


def homogenize(stack: LayerStack) -> EffectivePlate:
    """Reduce a stack to one plate via thickness-weighted (Voigt) means.

    Density, plane-stress stiffness and c44 are averaged by thickness; the
    permittivity is that of the piezoelectric layer alone, since only that
    layer carries the lateral drive field.
    """
    piezo = [layer for layer in stack.layers if layer.piezo]
    if len(piezo) != 1:
        raise ConfigurationError("homogenize needs exactly one piezoelectric layer")
    t_total = stack.total_thickness

    def mean(values: Iterable[float]) -> float:
        return sum(v * layer.thickness for v, layer in zip(values, stack.layers)) / t_total

    return EffectivePlate(
        total_thickness=t_total,
        rho_eff=mean(layer.material.density for layer in stack.layers),
        c_eff=mean(plane_stress_stiffness(layer.material) for layer in stack.layers),
        g_eff=mean(layer.material.c44 for layer in stack.layers),
        eps_eff_r=piezo[0].material.eps11_r,
    )


def load_materials(path: str | os.PathLike | None = None) -> dict[str, ElasticMaterial]:
    """Load a material fixtures file keyed by name."""
    path = Path(path) if path is not None else fixtures_dir() / "materials.json"
    with open(path) as fh:
        doc = json.load(fh)
    records = doc["materials"] if isinstance(doc, dict) else doc
    out = {}
    for rec in records:
        mat = ElasticMaterial.from_record(rec)
        out[mat.name] = mat
    return out


def build_stack(
    spec: Sequence[dict], materials: dict[str, ElasticMaterial] | None = None
) -> LayerStack:
    """Build a stack from records like ``{"material": "BTO", "thickness": 125e-9, "piezo": true}``."""
    materials = materials if materials is not None else load_materials()
    layers = []
    for rec in spec:
        name = rec["material"]
        if name not in materials:
            raise ConfigurationError(f"unknown material {name!r}")
        layers.append(Layer(materials[name], float(rec["thickness"]), bool(rec.get("piezo", False))))
    return LayerStack(tuple(layers))


def bto_au_stack(bto_thickness: float = 125e-9, electrode_thickness: float = 75e-9,
                materials: dict[str, ElasticMaterial] | None = None) -> LayerStack:
    """BTO transduction layer under a gold electrode layer."""
    return build_stack(
        [
            {"material": "BTO", "thickness": bto_thickness, "piezo": True},
            {"material": "Au", "thickness": electrode_thickness},
        ],
        materials,
    )
