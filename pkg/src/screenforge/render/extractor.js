/* In-page annotation extractor.
 *
 * Walks every element carrying data-pii / data-product / data-order,
 * measures value-matched text via DOM ranges (one box per rendered line,
 * grouped by >= 50% vertical overlap), takes border boxes for inputs and
 * content boxes for images, and classifies visibility by hit-testing a
 * 3x3 grid of cell-center points. Expects the emulated viewport to cover
 * the full page so elementFromPoint works below the fold.
 *
 * Payload schema: {extractor: 1, page: [w, h], records: [...], errors: [...]}
 */
"use strict";

function __sf_extract(values) {
  var GRID = 3;
  var FAMILIES = ["data-pii", "data-product", "data-order"];

  function pageRect(r) {
    return [r.left + window.scrollX, r.top + window.scrollY, r.width, r.height];
  }

  function groupLines(rects) {
    var sorted = rects.slice().sort(function (a, b) {
      return a[1] - b[1] || a[0] - b[0];
    });
    var groups = [];
    sorted.forEach(function (rect) {
      for (var i = 0; i < groups.length; i++) {
        var g = groups[i];
        var gy1 = Math.min.apply(null, g.map(function (r) { return r[1]; }));
        var gy2 = Math.max.apply(null, g.map(function (r) { return r[1] + r[3]; }));
        var overlap = Math.min(gy2, rect[1] + rect[3]) - Math.max(gy1, rect[1]);
        var smaller = Math.min(gy2 - gy1, rect[3]);
        if (smaller > 0 && overlap >= 0.5 * smaller) {
          g.push(rect);
          return;
        }
      }
      groups.push([rect]);
    });
    var lines = groups.map(function (g) {
      var x1 = Math.min.apply(null, g.map(function (r) { return r[0]; }));
      var y1 = Math.min.apply(null, g.map(function (r) { return r[1]; }));
      var x2 = Math.max.apply(null, g.map(function (r) { return r[0] + r[2]; }));
      var y2 = Math.max.apply(null, g.map(function (r) { return r[1] + r[3]; }));
      return [x1, y1, x2 - x1, y2 - y1];
    });
    lines.sort(function (a, b) { return a[1] - b[1] || a[0] - b[0]; });
    return lines;
  }

  function textNodesUnder(el) {
    var nodes = [];
    var walker = document.createTreeWalker(el, NodeFilter.SHOW_TEXT, null);
    var node;
    while ((node = walker.nextNode())) nodes.push(node);
    return nodes;
  }

  function valueRangeRects(el, value) {
    if (!value) return null;
    var nodes = textNodesUnder(el);
    var flat = nodes.map(function (n) { return n.data; }).join("");
    var start = flat.indexOf(value);
    if (start < 0) return null;
    var end = start + value.length;
    var range = document.createRange();
    var offset = 0;
    nodes.forEach(function (n) {
      var next = offset + n.data.length;
      if (start >= offset && start < next) range.setStart(n, start - offset);
      if (end > offset && end <= next) range.setEnd(n, end - offset);
      offset = next;
    });
    var rects = [];
    var list = range.getClientRects();
    for (var i = 0; i < list.length; i++) {
      if (list[i].width > 0 && list[i].height > 0) rects.push(pageRect(list[i]));
    }
    return rects.length ? rects : null;
  }

  function wholeTextRects(el) {
    var rects = [];
    textNodesUnder(el).forEach(function (n) {
      var range = document.createRange();
      range.selectNodeContents(n);
      var list = range.getClientRects();
      for (var i = 0; i < list.length; i++) {
        if (list[i].width > 0 && list[i].height > 0) rects.push(pageRect(list[i]));
      }
    });
    return rects;
  }

  function visibility(el, box) {
    var hits = [];
    var nHits = 0;
    for (var row = 0; row < GRID; row++) {
      hits.push([]);
      for (var col = 0; col < GRID; col++) {
        var px = box[0] + (col + 0.5) * box[2] / GRID - window.scrollX;
        var py = box[1] + (row + 0.5) * box[3] / GRID - window.scrollY;
        var top = document.elementFromPoint(px, py);
        var hit = top !== null && (top === el || el.contains(top));
        hits[row].push(hit);
        if (hit) nHits++;
      }
    }
    if (nHits === GRID * GRID) return { status: "full" };
    if (nHits === 0) return { status: "occluded" };
    var rows = [], cols = [];
    for (var r = 0; r < GRID; r++) {
      for (var c = 0; c < GRID; c++) {
        if (hits[r][c]) {
          if (rows.indexOf(r) < 0) rows.push(r);
          if (cols.indexOf(c) < 0) cols.push(c);
        }
      }
    }
    var r0 = Math.min.apply(null, rows), r1 = Math.max.apply(null, rows);
    var c0 = Math.min.apply(null, cols), c1 = Math.max.apply(null, cols);
    return {
      status: "clipped",
      clip: [
        box[0] + c0 * box[2] / GRID,
        box[1] + r0 * box[3] / GRID,
        (c1 - c0 + 1) * box[2] / GRID,
        (r1 - r0 + 1) * box[3] / GRID,
      ],
    };
  }

  var records = [];
  var errors = [];
  var selector = FAMILIES.map(function (f) { return "[" + f + "]"; }).join(",");
  var elements = document.querySelectorAll(selector);

  elements.forEach(function (el) {
    var attr = null;
    for (var i = 0; i < FAMILIES.length; i++) {
      if (el.hasAttribute(FAMILIES[i])) { attr = FAMILIES[i]; break; }
    }
    try {
      var tag = el.tagName.toLowerCase();
      var kind = (tag === "input" || tag === "select" || tag === "textarea")
        ? "input" : (tag === "img" ? "image" : "text");
      var record = {
        key: el.getAttribute("data-key") || "",
        attr: attr,
        label: el.getAttribute(attr),
        element: kind,
        rects: [],
        visibility: "occluded",
      };
      var border = el.getBoundingClientRect();
      if (border.width <= 0 || border.height <= 0) {
        records.push(record);
        return;
      }
      var box = pageRect(border);
      var rects;
      if (kind === "text") {
        var matched = valueRangeRects(el, values[record.key] || "");
        var base = matched || wholeTextRects(el);
        rects = base.length ? groupLines(base) : [box];
      } else {
        rects = [box];
      }
      var vis = visibility(el, box);
      record.visibility = vis.status;
      if (vis.status !== "occluded") {
        record.rects = rects;
        if (vis.clip) record.clip = vis.clip;
      }
      records.push(record);
    } catch (err) {
      errors.push({ element: el.tagName, attr: attr, error: String(err) });
    }
  });

  return JSON.stringify({
    extractor: 1,
    page: [
      document.documentElement.scrollWidth,
      document.documentElement.scrollHeight,
    ],
    records: records,
    errors: errors,
  });
}
