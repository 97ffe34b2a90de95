class Widget {
  render() { return '<div/>'; }
}
