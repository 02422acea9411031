export function round(x) {
  // two decimals
  return Math.round(x * 100) / 100;
}
