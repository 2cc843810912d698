"""Behavioral model of the switched LED light source.

A constant-current driver feeds one of up to seven LEDs through a 12-way
break-before-make rotary switch.  Terminals 8-12 are unconnected.  States are
immutable; every transition returns new states.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .errors import InvalidArgument, UnsupportedCapability
from .spectral import LedSpec, Spectrum, WavelengthGrid, gaussian_spd, reference_flux

SWITCH_POSITIONS = 12
MAX_LEDS = 7
DRIVE_CURRENT_MA = 350.0
SWITCH_RATING_MA = 500.0
DEFAULT_EFFICIENCY = 0.85


class DriverVariant(enum.Enum):
    LOW_VOLTAGE = "low"    # MicroPuck, fixed output
    HIGH_VOLTAGE = "high"  # BuckPuck, potentiometer dimming

    @property
    def dimmable(self) -> bool:
        return self is DriverVariant.HIGH_VOLTAGE

    @classmethod
    def parse(cls, text) -> DriverVariant:
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("-", "_")
        aliases = {"low": cls.LOW_VOLTAGE, "low_voltage": cls.LOW_VOLTAGE, "lowvoltage": cls.LOW_VOLTAGE,
                   "high": cls.HIGH_VOLTAGE, "high_voltage": cls.HIGH_VOLTAGE,
                   "highvoltage": cls.HIGH_VOLTAGE}
        if key not in aliases:
            raise InvalidArgument(f"unknown driver variant {text!r}")
        return aliases[key]


@dataclass(frozen=True)
class LightSourceState:
    variant: DriverVariant
    leds: tuple[LedSpec, ...]
    position: int = 1
    dimming: float = 1.0
    transitioning: bool = False
    efficiency: float = DEFAULT_EFFICIENCY

    @property
    def energized(self) -> LedSpec | None:
        """The LED carrying current, if any."""
        if self.transitioning or self.position > len(self.leds):
            return None
        return self.leds[self.position - 1]

    @property
    def energized_count(self) -> int:
        return 0 if self.energized is None else 1


def new_source(variant: DriverVariant, leds, efficiency: float = DEFAULT_EFFICIENCY) -> LightSourceState:
    leds = tuple(leds)
    if not 1 <= len(leds) <= MAX_LEDS:
        raise InvalidArgument(f"a source takes 1 to {MAX_LEDS} LEDs, got {len(leds)}")
    if not 0 < efficiency <= 1:
        raise InvalidArgument(f"collection efficiency must be in (0, 1], got {efficiency}")
    return LightSourceState(DriverVariant.parse(variant), leds, efficiency=float(efficiency))


def rotate_to(state: LightSourceState, position: int) -> tuple[LightSourceState, LightSourceState]:
    """Turn the switch to ``position``.

    Returns the open-contact intermediate state followed by the settled
    state.  Rotating to the current position still breaks contact first.
    """
    if int(position) != position or not 1 <= position <= SWITCH_POSITIONS:
        raise InvalidArgument(f"switch position must be in 1..{SWITCH_POSITIONS}, got {position}")
    position = int(position)
    return (replace(state, position=position, transitioning=True),
            replace(state, position=position, transitioning=False))


def drive_current_ma(state: LightSourceState) -> float:
    return DRIVE_CURRENT_MA if state.energized is not None else 0.0


def set_dimming(state: LightSourceState, level: float) -> LightSourceState:
    if not state.variant.dimmable:
        raise UnsupportedCapability(f"{state.variant.name} driver has no dimming control")
    if not 0.0 <= level <= 1.0:
        raise InvalidArgument(f"dimming level must be in [0, 1], got {level}")
    return replace(state, dimming=float(level))


def active_emission(state: LightSourceState, grid: WavelengthGrid) -> Spectrum | None:
    """Spectrum delivered into the light guide, or ``None`` when dark.

    Amplitude is flux relative to the brightest configured LED, times the
    dimming level, times the collection efficiency.
    """
    led = state.energized
    if led is None:
        return None
    amplitude = led.flux / reference_flux(state.leds) * state.dimming * state.efficiency
    return gaussian_spd(led, grid).scaled(amplitude)
