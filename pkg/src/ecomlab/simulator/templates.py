"""Anchor-delimited page templates and the renderer.

A template body uses ``{{field}}`` placeholders for scalar fields and
``{{#section}} ... {{/section}}`` blocks that repeat once per row. Every
placeholder sits between a prefix and suffix marker listed in
``field_anchors``; the extractor's rule files use the same markers.
"""

from __future__ import annotations

import html
import re
from dataclasses import dataclass, field
from typing import Any, Mapping

PLACEHOLDER = re.compile(r"\{\{([a-z_][a-z0-9_]*)\}\}")
SECTION = re.compile(r"\{\{#([a-z_][a-z0-9_]*)\}\}(.*?)\{\{/\1\}\}", re.S)


class TemplateError(ValueError):
    pass


class RenderError(KeyError):
    pass


@dataclass(frozen=True)
class PageTemplate:
    name: str
    body: str
    field_anchors: Mapping[str, tuple[str, str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in self.placeholders():
            if name not in self.field_anchors:
                raise TemplateError(f"placeholder {name!r} has no anchor pair")
            prefix, suffix = self.field_anchors[name]
            if not prefix or not suffix:
                raise TemplateError(f"anchors for {name!r} must be nonempty")
            if prefix + "{{" + name + "}}" + suffix not in self.body:
                raise TemplateError(f"placeholder {name!r} is not wrapped by its anchors")
            if self.body.count(prefix) != 1:
                raise TemplateError(f"prefix anchor for {name!r} is not unique in the body")
        for name in self.field_anchors:
            if name not in self.placeholders():
                raise TemplateError(f"anchor for {name!r} matches no placeholder")

    def placeholders(self) -> list[str]:
        return PLACEHOLDER.findall(self.body)

    def sections(self) -> list[str]:
        return [m.group(1) for m in SECTION.finditer(self.body)]


def _fill(text: str, values: Mapping[str, Any], where: str) -> str:
    def sub(m: re.Match) -> str:
        key = m.group(1)
        if key not in values:
            raise RenderError(f"{where}: no value for placeholder {key!r}")
        # braces are escaped too so a value can never be read as a placeholder
        return html.escape(str(values[key]), quote=True).replace("{", "&#123;").replace("}", "&#125;")

    return PLACEHOLDER.sub(sub, text)


def render_page(state: Mapping[str, Any], template: PageTemplate) -> str:
    """Substitute ``state`` into ``template``.

    Section blocks take a list of row mappings from ``state[section]``;
    optional sections may map to an empty list. Values are HTML-escaped so
    no field can forge an anchor.
    """

    def expand(m: re.Match) -> str:
        section, inner = m.group(1), m.group(2)
        if section not in state:
            raise RenderError(f"no rows for section {section!r}")
        return "".join(_fill(inner, row, section) for row in state[section])

    body = SECTION.sub(expand, template.body)
    return _fill(body, state, template.name)


FILLER = """<HEAD>
  <TITLE>{title}</TITLE>
  <STYLE TYPE="text/css">
  <!--
    .desc {{ color: #3333CC }}
    .price {{ color: #FF0000 }}
  -->
  </STYLE>
  <SCRIPT LANGUAGE="JavaScript">
  <!--
  function auctionTime() {{ window.open("clock.asp", "new_window", "height=100,width=240"); }}
  //-->
  </SCRIPT>
</HEAD>
<MAP NAME="nav">
<AREA SHAPE="rect" COORDS="372,0,442,17" HREF="signup.sa?UID=DF1">
<AREA SHAPE="rect" COORDS="306,0,371,17" HREF="aucnews.asp?UID=DF1">
</MAP>
"""

AUCTION_TEMPLATE = PageTemplate(
    name="yankee-auction",
    body=(
        "<HTML>\n"
        + FILLER.format(title="Auctions: Action-Packed Online Bidding!")
        + "<BODY>\n"
        '<div class="status">Auction {{status}}</div>\n'
        "<table class=\"lot\">\n"
        '<tr><td>Item #</td><td class="aid">{{auction_id}}</td></tr>\n'
        '<tr><td>Product</td><td class="desc">{{title}}</td></tr>\n'
        '<tr><td>Category</td><td class="cat">{{category}}</td></tr>\n'
        '<tr><td>Condition</td><td class="cond">{{condition}}</td></tr>\n'
        '<tr><td>Life cycle</td><td class="life">{{life_cycle}}</td></tr>\n'
        '<tr><td>Quantity</td><td class="lot">{{lot_size}}</td></tr>\n'
        '<tr><td>Minimum Bid</td><td class="price minbid">{{min_required_bid}}</td></tr>\n'
        '<tr><td>Bid Increment</td><td class="incr">{{bid_increment}}</td></tr>\n'
        '<tr><td>Opened</td><td class="opened">{{scheduled_open}}</td></tr>\n'
        '<tr><td>Closes</td><td class="close">{{scheduled_close}}</td></tr>\n'
        '<tr><td>Ends</td><td class="ends">{{ends}}</td></tr>\n'
        "</table>\n"
        '<table class="bidders">\n'
        "<tr><th>Bidder</th><th>Bid</th><th>Qty</th></tr>\n"
        "{{#winners}}"
        '<tr><td class="who">{{bidder_id}}</td>'
        '<td class="price bid">{{price}}</td>'
        '<td class="qty">{{quantity}}</td></tr>\n'
        "{{/winners}}"
        "</table>\n"
        "</BODY>\n</HTML>\n"
    ),
    field_anchors={
        "status": ('<div class="status">Auction ', "</div>"),
        "auction_id": ('<td class="aid">', "</td>"),
        "title": ('<td class="desc">', "</td>"),
        "category": ('<td class="cat">', "</td>"),
        "condition": ('<td class="cond">', "</td>"),
        "life_cycle": ('<td class="life">', "</td>"),
        "lot_size": ('<td class="lot">', "</td>"),
        "min_required_bid": ('<td class="price minbid">', "</td>"),
        "bid_increment": ('<td class="incr">', "</td>"),
        "scheduled_open": ('<td class="opened">', "</td>"),
        "scheduled_close": ('<td class="close">', "</td>"),
        "ends": ('<td class="ends">', "</td>"),
        "bidder_id": ('<tr><td class="who">', "</td>"),
        "price": ('<td class="price bid">', "</td>"),
        "quantity": ('<td class="qty">', "</td></tr>"),
    },
)

SEARCH_TEMPLATE = PageTemplate(
    name="p2p-search",
    body=(
        "<html><head><title>Search</title></head><body>\n"
        '<h1>Search results for <span class="query">{{query_album}}</span></h1>\n'
        '<p>Searched <span class="ts">{{searched_at}}</span></p>\n'
        '<table class="results">\n'
        "{{#rows}}"
        '<tr class="hit"><td class="user">{{sharer_id}}</td>'
        '<td class="file">{{file_title}}</td>'
        '<td class="match">{{album_match}}</td>'
        '<td class="size">{{file_size}}</td>'
        '<td class="kbps">{{bitrate}}</td>'
        '<td class="len">{{track_length}}</td>'
        '<td class="conn">{{connection_class}}</td>'
        '<td class="hz">{{sample_rate}}</td>'
        '<td class="queue">{{queue}}</td></tr>\n'
        "{{/rows}}"
        "</table>\n</body></html>\n"
    ),
    field_anchors={
        "query_album": ('<span class="query">', "</span>"),
        "searched_at": ('<span class="ts">', "</span>"),
        "sharer_id": ('<tr class="hit"><td class="user">', "</td>"),
        "file_title": ('<td class="file">', "</td>"),
        "album_match": ('<td class="match">', "</td>"),
        "file_size": ('<td class="size">', "</td>"),
        "bitrate": ('<td class="kbps">', "</td>"),
        "track_length": ('<td class="len">', "</td>"),
        "connection_class": ('<td class="conn">', "</td>"),
        "sample_rate": ('<td class="hz">', "</td>"),
        "queue": ('<td class="queue">', "</td></tr>"),
    },
)

PRODUCT_QUOTES_TEMPLATE = PageTemplate(
    name="product-quotes",
    body=(
        "<html><head><title>Compare prices</title></head><body>\n"
        '<div class="kind" data-kind="{{listing_kind}}"></div>\n'
        '<h1 class="pid">{{listing_id}}</h1>\n'
        '<h2 class="ptitle">{{title}}</h2>\n'
        '<p class="pcat">{{category}}</p>\n'
        '<table class="offers">\n'
        "{{#quotes}}"
        '<tr class="offer"><td class="store">{{retailer_id}}</td>'
        '<td class="amount">{{price}}</td>'
        '<td class="state">{{condition}}</td></tr>\n'
        "{{/quotes}}"
        "</table>\n</body></html>\n"
    ),
    field_anchors={
        "listing_kind": ('<div class="kind" data-kind="', '"></div>'),
        "listing_id": ('<h1 class="pid">', "</h1>"),
        "title": ('<h2 class="ptitle">', "</h2>"),
        "category": ('<p class="pcat">', "</p>"),
        "retailer_id": ('<tr class="offer"><td class="store">', "</td>"),
        "price": ('<td class="amount">', "</td>"),
        "condition": ('<td class="state">', "</td></tr>"),
    },
)

RETAILER_TEMPLATE = PageTemplate(
    name="retailer-profile",
    body=(
        "<html><head><title>Store profile</title></head><body>\n"
        '<div class="kind" data-kind="{{listing_kind}}"></div>\n'
        '<h1 class="pid">{{listing_id}}</h1>\n'
        '<p>Traffic rank <span class="rank">{{size_rank}}</span></p>\n'
        '<p>Mail-order catalog: <span class="catalog">{{catalog}}</span></p>\n'
        '<p>Refurb/discount outlet: <span class="refurb">{{refurb_discounter}}</span></p>\n'
        '<ul class="stores">\n'
        "{{#stores}}"
        '<li class="store-state">{{state}}</li>\n'
        "{{/stores}}"
        "</ul>\n"
        "{{#ratings}}"
        '<div class="ratings">\n'
        '<span class="r-ontime">{{on_time_delivery}}</span>\n'
        '<span class="r-support">{{customer_support}}</span>\n'
        '<span class="r-met">{{product_met_expectations}}</span>\n'
        '<span class="r-again">{{shop_again}}</span>\n'
        '<span class="surveys">{{survey_count}}</span>\n'
        '<span class="win-start">{{window_start}}</span>\n'
        '<span class="win-end">{{window_end}}</span>\n'
        "</div>\n"
        "{{/ratings}}"
        "</body></html>\n"
    ),
    field_anchors={
        "listing_kind": ('<div class="kind" data-kind="', '"></div>'),
        "listing_id": ('<h1 class="pid">', "</h1>"),
        "size_rank": ('<span class="rank">', "</span>"),
        "catalog": ('<span class="catalog">', "</span>"),
        "refurb_discounter": ('<span class="refurb">', "</span>"),
        "state": ('<li class="store-state">', "</li>"),
        "on_time_delivery": ('<span class="r-ontime">', "</span>"),
        "customer_support": ('<span class="r-support">', "</span>"),
        "product_met_expectations": ('<span class="r-met">', "</span>"),
        "shop_again": ('<span class="r-again">', "</span>"),
        "survey_count": ('<span class="surveys">', "</span>"),
        "window_start": ('<span class="win-start">', "</span>"),
        "window_end": ('<span class="win-end">', "</span>"),
    },
)
