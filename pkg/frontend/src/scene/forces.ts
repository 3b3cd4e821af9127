/** Minimal force simulation for the bubble field: circles are pulled to
 * their hull anchor, pushed apart on overlap, and damped. Tuned for quick,
 * fluid split animations; none of the constants are contract-bearing.
 * Deterministic: no randomness, fixed iteration order. */

import type { BubbleScene } from "./bubbles.js";

const ATTRACTION = 0.06;
const DAMPING = 0.82;
const SEPARATION = 0.55;
const PADDING = 2.5;

export function tick(scene: BubbleScene): void {
  const anchors = new Map(scene.hulls.map((h) => [h.cluster, h]));
  const circles = scene.circles;

  for (const c of circles) {
    const anchor = anchors.get(c.cluster);
    if (anchor) {
      c.vx += (anchor.cx - c.x) * ATTRACTION;
      c.vy += (anchor.cy - c.y) * ATTRACTION;
    }
  }

  for (let i = 0; i < circles.length; i++) {
    for (let j = i + 1; j < circles.length; j++) {
      const a = circles[i];
      const b = circles[j];
      const dx = b.x - a.x;
      const dy = b.y - a.y;
      const minDist = a.radius + b.radius + PADDING;
      const distSq = dx * dx + dy * dy;
      if (distSq >= minDist * minDist) continue;
      const dist = Math.sqrt(distSq) || 0.01;
      const push = ((minDist - dist) / dist) * SEPARATION;
      const px = dx * push * 0.5;
      const py = dy * push * 0.5;
      a.vx -= px;
      a.vy -= py;
      b.vx += px;
      b.vy += py;
    }
  }

  for (const c of circles) {
    c.vx *= DAMPING;
    c.vy *= DAMPING;
    c.x += c.vx;
    c.y += c.vy;
  }
}

/** Run the simulation to a near-steady state (used when animation frames
 * are unavailable, e.g. tests or initial layout). */
export function settle(scene: BubbleScene, iterations = 120): void {
  for (let i = 0; i < iterations; i++) tick(scene);
}
