"""
Configuration Module for axiomlib

This module handles loading, saving, and providing default configuration parameters
for the containment simulator. It centralizes all tunable parameters in one place,
making it easy to adjust mechanism behavior without modifying code.

Key features:
- Loads configuration from a JSON file or falls back to the defaults
- Fills keys missing from an older file with their default values
- Coerces command-line overrides to the type of the current value
- Never reads environment variables, so runs stay reproducible

The configuration parameters are divided into several categories:
1. Consensus Parameters - Validator count and sealing threshold
2. Identity Parameters - Certificate term and authentication factors
3. Market Parameters - Token growth detector and petition quorum
4. Simulation Parameters - Attempt model, capability scale, vault shape

Example Usage:
    from axiomlib.config import load_config, save_config, apply_override

    config = load_config('axiom_config.json')
    term = config['VALIDITY_TERM']

    # Update a parameter from a command-line style string
    apply_override(config, 'VALIDITY_TERM', '50')
    save_config(config, 'axiom_config.json')
"""

import json
import logging
import os
from fractions import Fraction

from .errors import InvalidConfigError

logger = logging.getLogger(__name__)

# File path for the configuration
CONFIG_FILE = 'axiom_config.json'

# Default configuration for the simulator
DEFAULT_CONFIG = {
    # Consensus parameters
    'VALIDATOR_COUNT': 4,             # Permissioned validators sealing blocks
    'CONSENSUS_THRESHOLD': '2/3',     # Fraction of validators required (quorum = ceil(t*n))

    # Identity parameters
    'VALIDITY_TERM': 100,             # Certificate lifetime in ticks
    'REQUIRED_FACTORS': 2,            # Distinct factor kinds for ordinary verification
    'HIGH_VALUE_FACTORS': 3,          # Factor kinds for launch-code style actions
    'ALGORITHM': 'hmac-sha256',       # Signing scheme tag written on certificates

    # Market parameters
    'GROWTH_RATIO': 2.0,              # Spend flagged when each request >= ratio * previous
    'GROWTH_WINDOW': 3,               # ... over this many consecutive requests
    'PETITION_FRACTION': '2/3',       # Petition threshold as a fraction of the electorate
    'SPEND_AMOUNT': 1.0,              # Resource units requested per ordinary spend
    'GRAB_MULTIPLIER': 8.0,           # Size of a resource-grab request relative to SPEND_AMOUNT

    # Simulation parameters
    'INCOMPETENCE_RATE': 0.1,         # Per-tick chance an incompetent agent mis-specifies
    'RESTRICTED_LEVEL': 5,            # Capability levels at or above this need a license
    'MAX_CAPABILITY': 10,             # Top of the capability scale
    'VAULT_CUSTODIANS': 5,            # Custodians holding the next-generation vault
    'VAULT_QUORUM': 4,                # Signatures needed to unlock it
    'DEFAULT_TICKS': 24,              # Scenario duration when the scenario file gives none
}

# Keys whose values are rational fractions written as "a/b"
FRACTION_KEYS = ('CONSENSUS_THRESHOLD', 'PETITION_FRACTION')


def load_config(path=CONFIG_FILE):
    """
    Load configuration from a JSON file, or return the defaults if it doesn't exist.

    Args:
        path: Path of the JSON configuration file (None means defaults only)

    Returns:
        Configuration dictionary with every default key present
    """
    config = DEFAULT_CONFIG.copy()
    if path is None or not os.path.exists(path):
        return config

    try:
        with open(path, 'r') as file:
            loaded = json.load(file)
    except (json.JSONDecodeError, IOError) as e:
        logger.warning("Error loading configuration %s: %s; using defaults", path, e)
        return config

    if not isinstance(loaded, dict):
        logger.warning("Configuration %s is not a JSON object; using defaults", path)
        return config

    for key, value in loaded.items():
        if key not in DEFAULT_CONFIG:
            # Unknown keys are errors
            raise InvalidConfigError(f"unknown configuration key '{key}' in {path}")
        config[key] = value

    validate_config(config)
    return config


def save_config(config, path=CONFIG_FILE):
    """
    Save configuration to file.

    Args:
        config: Configuration dictionary to save
        path: Destination path
    """
    try:
        with open(path, 'w') as file:
            json.dump(config, file, indent=4, sort_keys=True)
        logger.info("Configuration saved to %s", path)
    except IOError as e:
        logger.warning("Error saving configuration: %s", e)


def apply_override(config, parameter, value):
    """
    Set a single parameter from a string, keeping the type of the current value.

    Args:
        config: Configuration dictionary to update in place
        parameter: Name of the parameter to change
        value: New value as a string

    Returns:
        The updated configuration dictionary
    """
    if parameter not in config:
        raise InvalidConfigError(f"parameter {parameter} not found in configuration")

    current = config[parameter]
    try:
        # bool before int: bool is a subclass of int
        if isinstance(current, bool):
            config[parameter] = value.lower() in ('true', 'yes', '1')
        elif isinstance(current, float):
            config[parameter] = float(value)
        elif isinstance(current, int):
            config[parameter] = int(value)
        else:
            config[parameter] = value
    except ValueError as e:
        raise InvalidConfigError(f"invalid value for {parameter}: {value!r}") from e

    validate_config(config)
    return config


def fraction(config, key):
    """Return a FRACTION_KEYS entry as a Fraction."""
    try:
        return Fraction(str(config[key]))
    except (ValueError, ZeroDivisionError) as e:
        raise InvalidConfigError(f"{key} must be a fraction like '2/3', got {config[key]!r}") from e


def validate_config(config):
    """
    Check ranges of the tunables.

    Args:
        config: Configuration dictionary

    Raises:
        InvalidConfigError: if any value is out of range
    """
    for key in FRACTION_KEYS:
        value = fraction(config, key)
        if not 0 < value <= 1:
            raise InvalidConfigError(f"{key} must lie in (0, 1], got {value}")

    positive_ints = ('VALIDATOR_COUNT', 'VALIDITY_TERM', 'REQUIRED_FACTORS',
                     'HIGH_VALUE_FACTORS', 'GROWTH_WINDOW', 'VAULT_CUSTODIANS',
                     'VAULT_QUORUM', 'MAX_CAPABILITY')
    for key in positive_ints:
        if not isinstance(config[key], int) or config[key] < 1:
            raise InvalidConfigError(f"{key} must be a positive integer, got {config[key]!r}")

    if config['VAULT_QUORUM'] > config['VAULT_CUSTODIANS']:
        raise InvalidConfigError("VAULT_QUORUM cannot exceed VAULT_CUSTODIANS")
    if not 0.0 <= float(config['INCOMPETENCE_RATE']) <= 1.0:
        raise InvalidConfigError("INCOMPETENCE_RATE must lie in [0, 1]")
    if float(config['GROWTH_RATIO']) <= 1.0:
        raise InvalidConfigError("GROWTH_RATIO must exceed 1")
    if not 0 <= config['RESTRICTED_LEVEL'] <= config['MAX_CAPABILITY']:
        raise InvalidConfigError("RESTRICTED_LEVEL must lie within the capability scale")
    if config['DEFAULT_TICKS'] < 0:
        raise InvalidConfigError("DEFAULT_TICKS cannot be negative")
