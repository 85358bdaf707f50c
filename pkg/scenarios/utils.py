import json
import math

import numpy as np


def success_payload(message, data=None):
    payload = {"status": "success", "message": message}
    if data is not None:
        payload["data"] = data
    return payload


def error_payload(message, errors=None, data=None):
    payload = {"status": "error", "message": message}
    if errors is not None:
        payload["errors"] = errors
    if data is not None:
        payload["data"] = data
    return payload


def jsonable(value):
    """Plain JSON types; non-finite floats become the strings 'inf', '-inf' and 'nan'."""
    if isinstance(value, dict):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return [jsonable(item) for item in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isfinite(value):
            return value
        return 'nan' if math.isnan(value) else ('inf' if value > 0 else '-inf')
    if isinstance(value, complex):
        return {'re': jsonable(value.real), 'im': jsonable(value.imag)}
    return value if value is None or isinstance(value, str) else str(value)


def write_json(path, payload):
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(jsonable(payload), handle, sort_keys=True, indent=2, ensure_ascii=False)
        handle.write('\n')


def flatten_errors(errors, prefix=''):
    """DRF error structures as 'field.path[index]: message' lines."""
    lines = []
    if isinstance(errors, dict):
        for key, value in errors.items():
            if key == 'non_field_errors':
                path = prefix
            elif isinstance(key, int) or str(key).isdigit():
                path = f'{prefix}[{key}]'
            else:
                path = f'{prefix}.{key}' if prefix else str(key)
            lines.extend(flatten_errors(value, path))
    elif isinstance(errors, list):
        if all(isinstance(item, str) for item in errors):
            lines.extend(f'{prefix or "scenario"}: {item}' for item in errors)
        else:
            for index, item in enumerate(errors):
                if item:
                    lines.extend(flatten_errors(item, f'{prefix}[{index}]'))
    else:
        lines.append(f'{prefix or "scenario"}: {errors}')
    return lines
