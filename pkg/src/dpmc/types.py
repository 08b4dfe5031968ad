"""Small shared value types."""

from typing import NamedTuple


class AmplitudePair(NamedTuple):
    """Complex scattering amplitudes at one angle.

    s1: perpendicular polarization, s2: parallel polarization.
    """
    s1: complex
    s2: complex

    @property
    def intensity(self) -> float:
        """|S1|^2 + |S2|^2 (the unpolarized intensity numerator)."""
        return abs(self.s1) ** 2 + abs(self.s2) ** 2

    @property
    def mean_modulus(self) -> float:
        """(|S1| + |S2|)/2, the comparison quantity for method agreement."""
        return 0.5 * (abs(self.s1) + abs(self.s2))
