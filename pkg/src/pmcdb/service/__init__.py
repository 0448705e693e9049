from .app import create_iws_app, create_rss_app, create_sss_app
from .client import HttpIws, HttpRss, HttpSss

__all__ = [
    "create_sss_app",
    "create_iws_app",
    "create_rss_app",
    "HttpSss",
    "HttpIws",
    "HttpRss",
]
