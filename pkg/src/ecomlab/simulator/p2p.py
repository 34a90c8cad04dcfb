"""Synthetic peer-to-peer search corpora."""

from __future__ import annotations

import random
from dataclasses import dataclass

from ..market import Timestamp, iso
from .templates import SEARCH_TEMPLATE, render_page

BITRATES = (96, 128, 160, 192, 256, 320)
CONNECTIONS = ("Modem", "ISDN", "DSL", "Cable", "T1", "T3")
SAMPLE_RATES = (22050, 44100, 48000)


@dataclass(frozen=True)
class Album:
    album_id: str
    artist: str
    title: str
    tracks: tuple[str, ...] = ("Intro", "Home", "Landslide", "Travelin' Soldier")


@dataclass
class P2PCorpus:
    captured_at: Timestamp
    documents: dict[str, str]
    rows: dict[str, list[dict]]
    truth_counts: dict[str, int]


def search_rows(album: Album, n: int, rng: random.Random, user_pool: int) -> list[dict]:
    rows = []
    for _ in range(n):
        track = rng.choice(album.tracks)
        matched = rng.random() < 0.8
        artist = album.artist if matched else rng.choice(["Various", "Unknown", album.artist + " Tribute"])
        bitrate = rng.choice(BITRATES)
        length = rng.randint(90, 420)
        rows.append(
            {
                "sharer_id": f"user{rng.randrange(user_pool):05d}",
                "file_title": f"{artist} - {track}.mp3",
                "album_match": "yes" if matched else "no",
                "file_size": bitrate * 125 * length + rng.randint(0, 4096),
                "bitrate": bitrate,
                "track_length": length,
                "connection_class": rng.choice(CONNECTIONS),
                "sample_rate": rng.choice(SAMPLE_RATES),
                "queue": f"{rng.randint(0, 9)}/{rng.randint(1, 10)}",
            }
        )
    return rows


def gen_p2p_corpus(
    albums: list[Album],
    n_per_album: int | dict[str, int],
    seed: int,
    captured_at: Timestamp = 0,
    user_pool: int = 500,
) -> P2PCorpus:
    """Render one search-result page per album; ``truth_counts`` holds the row counts."""
    rng = random.Random(seed)
    documents, all_rows, truth = {}, {}, {}
    for album in albums:
        n = n_per_album[album.album_id] if isinstance(n_per_album, dict) else n_per_album
        if n < 0:
            raise ValueError("n_per_album must be >= 0")
        rows = search_rows(album, n, rng, user_pool)
        state = {
            "query_album": album.album_id,
            "searched_at": iso(captured_at),
            "rows": rows,
        }
        documents[album.album_id] = render_page(state, SEARCH_TEMPLATE)
        all_rows[album.album_id] = rows
        truth[album.album_id] = n
    return P2PCorpus(captured_at, documents, all_rows, truth)


def default_albums(n: int) -> list[Album]:
    return [Album(f"alb{i:03d}", f"Artist {i}", f"Album {i}") for i in range(n)]
