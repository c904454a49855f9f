#!/usr/bin/env python3
"""
Output Verification Script
Checks a run directory against its manifest and, optionally, reproduces it
"""

import os
import tempfile
from dataclasses import fields
from typing import Dict, List

from result_writer import MANIFEST_NAME, file_sha256, load_manifest
from logger_config import setup_logger, get_default_log_file

logger = setup_logger('verify_outputs', get_default_log_file('verify_outputs'))

REPRODUCIBLE_KINDS = ('csv', 'json')


def _check_files(run_dir: str, manifest: Dict[str, object], results: Dict[str, object]):
    for entry in manifest.get('files', []):
        path = os.path.join(run_dir, entry['name'])
        if not os.path.exists(path):
            print(f"  ❌ {entry['name']} - MISSING")
            results['missing'].append(entry['name'])
            continue
        size_kb = os.path.getsize(path) / 1024
        if file_sha256(path) != entry['sha256']:
            print(f"  ❌ {entry['name']} - CHECKSUM MISMATCH")
            results['mismatched'].append(entry['name'])
            continue
        print(f"  ✅ {entry['name']} - {size_kb:.1f} KB")
        results['found'].append(entry['name'])
        results['total_size_kb'] += size_kb


def _rerun(manifest: Dict[str, object], results: Dict[str, object]):
    # Imported here: main imports this module
    from config import RunConfig
    from main import run_command

    metadata = manifest['metadata']
    known = {f.name for f in fields(RunConfig)}
    config = {k: v for k, v in metadata['config'].items() if k in known}
    config['command'] = metadata['command']

    with tempfile.TemporaryDirectory(prefix='pdlearn_verify_') as tmp:
        run_dir = run_command(RunConfig(**{**config, 'out': tmp}))
        fresh = load_manifest(run_dir) or {'files': []}
        fresh_hashes = {f['name']: f['sha256'] for f in fresh['files']}
        for entry in manifest['files']:
            if entry['kind'] not in REPRODUCIBLE_KINDS:
                continue
            if fresh_hashes.get(entry['name']) == entry['sha256']:
                print(f"  ✅ {entry['name']} - reproduced")
                results['reproduced'].append(entry['name'])
            else:
                print(f"  ❌ {entry['name']} - NOT REPRODUCED")
                results['not_reproduced'].append(entry['name'])


def verify_outputs(run_dir: str, rerun: bool = False) -> Dict[str, object]:
    """
    Verify every file listed in a run's manifest

    Args:
        run_dir: Directory written by a previous run
        rerun: Re-execute the embedded config and compare CSV/JSON bytes

    Returns:
        Dictionary with verification results
    """
    print(f"🔍 VERIFICATION FOR {run_dir}")
    print("=" * 70)

    results: Dict[str, object] = {
        'run_dir': run_dir,
        'found': [],
        'missing': [],
        'mismatched': [],
        'reproduced': [],
        'not_reproduced': [],
        'total_size_kb': 0.0,
        'success': True,
        'errors': [],
    }

    manifest = load_manifest(run_dir)
    if manifest is None:
        results['success'] = False
        results['errors'].append(f"No {MANIFEST_NAME} in {run_dir}")
        print(f"  ❌ {MANIFEST_NAME} - MISSING")
        return results

    print("\n📁 FILES:")
    _check_files(run_dir, manifest, results)

    if rerun:
        print("\n🔁 RERUN:")
        try:
            _rerun(manifest, results)
        except Exception as e:
            logger.error(f"Rerun failed: {str(e)}")
            results['errors'].append(f"Rerun failed: {e}")

    problems: List[str] = results['missing'] + results['mismatched'] + results['not_reproduced']
    results['success'] = not problems and not results['errors']

    print(f"\n{'🎉' if results['success'] else '⚠️'} VERIFICATION SUMMARY:")
    print("=" * 50)
    print(f"🗂️ Files checked: {len(manifest.get('files', []))}")
    print(f"💾 Total Size: {results['total_size_kb']:.1f} KB")
    print(f"✅ Status: {'SUCCESS' if results['success'] else 'ISSUES FOUND'}")
    if results['errors']:
        print("\n❌ Errors encountered:")
        for error in results['errors']:
            print(f"  - {error}")
    return results
