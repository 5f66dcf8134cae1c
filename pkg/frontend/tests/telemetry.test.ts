import { describe, expect, test } from "vitest";

import { buildSparkline, scoreToY } from "../src/telemetry.js";

describe("score mapping", () => {
  test("endpoints and midpoint", () => {
    expect(scoreToY(1, 64)).toBe(0);
    expect(scoreToY(-1, 64)).toBe(64);
    expect(scoreToY(0, 64)).toBe(32);
  });

  test("out-of-range scores are clamped", () => {
    expect(scoreToY(5, 64)).toBe(0);
    expect(scoreToY(-5, 64)).toBe(64);
  });
});

describe("sparkline geometry", () => {
  test("bypass turns are skipped, theta line positioned", () => {
    const geometry = buildSparkline(
      [
        { turn: 0, sAlign: null },
        { turn: 1, sAlign: 0.8 },
        { turn: 2, sAlign: 0.1 },
      ],
      0.35,
      300,
      64,
    );
    expect(geometry.markers).toHaveLength(2);
    expect(geometry.thetaY).toBeCloseTo(scoreToY(0.35, 64));
    expect(geometry.markers[0].belowTheta).toBe(false);
    expect(geometry.markers[1].belowTheta).toBe(true);
    // markers keep their turn slots: x positions reflect indices 1 and 2
    expect(geometry.markers[0].x).toBeCloseTo(150);
    expect(geometry.markers[1].x).toBeCloseTo(250);
  });

  test("empty series still yields a theta line", () => {
    const geometry = buildSparkline([], 0.5);
    expect(geometry.polyline).toBe("");
    expect(geometry.markers).toEqual([]);
    expect(geometry.thetaY).toBeGreaterThan(0);
  });
});
