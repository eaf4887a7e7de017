"""Physical Constants

Defined SI values used throughout the simulator and the extraction code.
"""

from pydantic import BaseModel, ConfigDict, field_validator


class PhysicalConstants(BaseModel):
    """Fixed physical constants (never fitted)."""
    model_config = ConfigDict(frozen=True)

    e_charge: float = 1.602176634e-19  # C
    k_B: float = 8.617333262e-5  # eV/K
    eps0: float = 8.8541878128e-12  # F/m
    epsr_sio2: float = 3.9

    @field_validator("e_charge", "k_B", "eps0", "epsr_sio2")
    @classmethod
    def must_be_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("physical constants must be strictly positive")
        return v

    @property
    def k_B_mev(self) -> float:
        """Boltzmann constant in meV/K."""
        return self.k_B * 1e3

    @property
    def permittivity_af_per_nm(self) -> float:
        """eps0 * epsr expressed in aF/nm (area in nm^2, thickness in nm)."""
        return self.eps0 * self.epsr_sio2 * 1e9


CONSTANTS = PhysicalConstants()

ATTO = 1e-18
