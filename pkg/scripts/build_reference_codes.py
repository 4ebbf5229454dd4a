# scripts/build_reference_codes.py

import os
import sys
import json

# --- Boilerplate ---
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, project_root)
# --- End of Boilerplate ---

from app.core.channel_model import discretize_biawgn
from app.core.construction import build_construction
from app.parsers.spec_parser import save_spec

# --- Reference operating point and output paths ---
N, PAYLOAD = 256, 128
DESIGN_EBN0_DB = 2.0
MAX_OUTPUTS = 256
CRC_LENGTH = 8
# CRC bits ride in the information set on top of the payload
K = PAYLOAD + CRC_LENGTH
CODES_DIR = os.path.join(project_root, 'codes')
SIM_CONFIG_PATH = os.path.join(CODES_DIR, 'sim_256_128.json')

# (file stem, mode, label, list size)
REFERENCE_CODES = [
    ('standard_256_128', 'standard', 'ST L=32', 32),
    ('abs_256_128', 'abs', 'ABS L=20', 20),
    ('abs_plus_256_128', 'abs+', 'ABS+ L=20', 20),
]


def build_reference_codes():
    """
    Constructs the (256, 128) standard, ABS and ABS+ codes for BI-AWGN at 2 dB
    and writes a simulation config comparing them with CRC-aided list decoding.
    The codes carry K = 136 information bits, so CRC-8 leaves a 128-bit payload.
    """
    print(f"--- Starting reference code build ({N}, {PAYLOAD}) + CRC-{CRC_LENGTH} at {DESIGN_EBN0_DB} dB ---")
    channel = discretize_biawgn(DESIGN_EBN0_DB, PAYLOAD / N)

    runs = []
    for step, (stem, mode, label, list_size) in enumerate(REFERENCE_CODES, start=1):
        print(f"[{step}] Constructing {mode} code...")
        result = build_construction(N, K, channel, MAX_OUTPUTS, mode, progress=True)
        path = save_spec(result.spec, os.path.join(CODES_DIR, f'{stem}.json'))
        print(f"✅ Gamma = {result.gamma:.6f}, saved to {path}")
        runs.append({
            'label': label,
            'spec': f'{stem}.json',
            'decoder': 'scl',
            'list_size': list_size,
            'crc': CRC_LENGTH,
        })

    print(f"[{len(REFERENCE_CODES) + 1}] Writing simulation config...")
    config = {
        'runs': runs,
        'ebn0_db': [1.0, 1.5, 2.0],
        'stopping': {'min_trials': 20000, 'min_word_errors': 100, 'max_trials': 20000},
        'seed': 2024,
        'workers': 1,
        'paired': True,
    }
    with open(SIM_CONFIG_PATH, 'w', encoding='utf-8') as f:
        json.dump(config, f, indent=2)
        f.write('\n')

    print("\n--- Reference code build COMPLETED. ---")
    print(f"Simulate with: python -m app.main simulate --config {os.path.relpath(SIM_CONFIG_PATH, project_root)}")


if __name__ == "__main__":
    build_reference_codes()
