import json
import os.path
import requests, numpy
from urllib.parse import urlencode


def build_url(base, params):
    return base + "?" + urlencode(params)


def load(path):
    # cached responses live next to the script
    with open(os.path.join(os.path.dirname(__file__), path)) as f:
        return json.load(f)


def fetch(url):
    return requests.get(url, timeout=5).json()
